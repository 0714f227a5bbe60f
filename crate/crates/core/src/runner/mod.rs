//! Experiment driver: single runs, `(c, beta)` sweeps and timing benchmarks.

mod config;
mod report;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use report::{
    bench_markdown, format_mm_ss, read_csv, sweep_markdown, write_bench_csv, write_csv,
};

use crate::ac::{assemble_ac, nodal_values, AcFactorization, AcSystem};
use crate::dq::{dq_operator, recover_control_dq};
use crate::error::{Error, Result};
use crate::geometry::{generate_nodes, NodeOptions, NodeSet};
use crate::kernels::Multiquadric;
use crate::lam::{solve_control_lam, solve_state, LamField, LamOptions, Phases};
use crate::linalg::Condition;
use crate::precision::{DoubleDouble, Precision, Real};
use crate::problems::{compute_metrics, problem, ControlProblem, Metrics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ac")]
    Ac,
    #[serde(rename = "lam-dq")]
    LamDq,
    #[serde(rename = "lam-lam")]
    LamLam,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ac => "ac",
            Method::LamDq => "lam-dq",
            Method::LamLam => "lam-lam",
        }
    }

    /// Column label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Ac => "AC",
            Method::LamDq => "LAM-DQ",
            Method::LamLam => "LAM-LAM",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(Method::Ac),
            "lam-dq" | "lamdq" => Ok(Method::LamDq),
            "lam-lam" | "lamlam" => Ok(Method::LamLam),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub config: RunConfig,
    pub n_nodes: usize,
    pub metrics: Metrics,
    /// `cond_1(G)` for AC, the largest local condition number otherwise.
    pub kappa: Condition,
    /// `cond_1(S)` of the global sparse system(s), local methods only.
    pub kappa_s: Option<f64>,
    /// `false` when `kappa` exceeds `1/u` of the working precision.
    pub reliable: bool,
    /// GMRES iterations of the global solve(s).
    pub iterations: usize,
    pub phases: Phases,
}

impl SolveReport {
    /// Pipeline wall time, node generation excluded.
    pub fn total_time(&self) -> Duration {
        self.phases.weights + self.phases.assembly + self.phases.solve
    }

    /// Same numbers, ignoring wall times.
    pub fn same_numbers(&self, other: &SolveReport) -> bool {
        self.config == other.config
            && self.n_nodes == other.n_nodes
            && self.metrics == other.metrics
            && self.kappa == other.kappa
            && self.kappa_s == other.kappa_s
            && self.reliable == other.reliable
            && self.iterations == other.iterations
    }
}

/// One grid point of a sweep; failures keep their message.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub config: RunConfig,
    pub outcome: std::result::Result<SolveReport, String>,
}

fn add_phases(a: &Phases, b: &Phases) -> Phases {
    Phases {
        weights: a.weights + b.weights,
        assembly: a.assembly + b.assembly,
        solve: a.solve + b.solve,
    }
}

fn max_condition(a: Condition, b: Condition) -> Condition {
    Condition {
        value: a.value.max(b.value),
        estimated: a.estimated || b.estimated,
    }
}

/// Node set described by the configuration (before any AC retagging).
pub fn nodes_for(cfg: &RunConfig) -> Result<NodeSet> {
    generate_nodes(&NodeOptions::new(cfg.n, cfg.layout).seed(cfg.seed))
}

/// Full pipeline for one configuration.
pub fn run(cfg: &RunConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let nodes = nodes_for(cfg)?;
    match cfg.precision {
        Precision::Double => run_on::<f64>(cfg, &nodes),
        Precision::Extended => run_on::<DoubleDouble>(cfg, &nodes),
    }
}

fn run_on<T: Real>(cfg: &RunConfig, nodes: &NodeSet) -> Result<SolveReport> {
    match cfg.method {
        Method::Ac => {
            let nodes = nodes.with_all_dirichlet();
            let prepared = AcPrepared::<T>::new(cfg, &nodes)?;
            prepared.solve(cfg, &nodes)
        }
        Method::LamDq | Method::LamLam => run_local::<T>(cfg, nodes),
    }
}

fn lam_options(cfg: &RunConfig) -> LamOptions {
    LamOptions {
        n_local: cfg.n_local,
        poly: cfg.poly,
        precondition: cfg.precond,
        global_condition: cfg.global_condition,
    }
}

fn run_local<T: Real>(cfg: &RunConfig, nodes: &NodeSet) -> Result<SolveReport> {
    let prob = problem(cfg.problem);
    let beta = T::from_f64(cfg.beta);
    let kernel = Multiquadric::new(T::from_f64(cfg.c))?;
    let spec = prob.spec(beta);
    let opts = lam_options(cfg);
    let state = solve_state(
        nodes,
        kernel,
        spec,
        &|x| prob.boundary(x),
        &|x| prob.target(x),
        opts,
    )?;
    let (u, kappa, kappa_s, iterations, phases) = match cfg.method {
        Method::LamDq => {
            let t = Instant::now();
            let rows = dq_operator(nodes, &kernel, cfg.poly, &spec, cfg.n_local)?;
            let dq_time = t.elapsed();
            let t = Instant::now();
            let u = recover_control_dq(nodes, &rows, &state.values)?;
            let phases = add_phases(
                &state.phases,
                &Phases {
                    weights: dq_time,
                    assembly: Duration::ZERO,
                    solve: t.elapsed(),
                },
            );
            let ks = state.kappa_global.map(|c| c.value);
            (u, state.kappa, ks, state.iterations, phases)
        }
        _ => {
            let control: LamField<T> = solve_control_lam(
                nodes,
                kernel,
                spec,
                &state.values,
                &|x| prob.target(x),
                opts,
            )?;
            let ks = match (state.kappa_global, control.kappa_global) {
                (Some(a), Some(b)) => Some(a.value.max(b.value)),
                _ => None,
            };
            (
                control.values,
                max_condition(state.kappa, control.kappa),
                ks,
                state.iterations + control.iterations,
                add_phases(&state.phases, &control.phases),
            )
        }
    };
    let metrics = compute_metrics(nodes, &state.values, &u, &prob, beta)?;
    Ok(SolveReport {
        config: cfg.clone(),
        n_nodes: nodes.len(),
        metrics,
        kappa,
        kappa_s,
        reliable: kappa.within(T::unit_roundoff()),
        iterations,
        phases,
    })
}

/// AC blocks and factorization shared by every `beta` at fixed `c`.
struct AcPrepared<T> {
    sys: AcSystem<T>,
    assembly: Duration,
}

impl<T: Real> AcPrepared<T> {
    fn new(cfg: &RunConfig, nodes: &NodeSet) -> Result<Self> {
        let prob: ControlProblem = problem(cfg.problem);
        let kernel = Multiquadric::new(T::from_f64(cfg.c))?;
        let t = Instant::now();
        let sys = assemble_ac(
            nodes,
            kernel,
            cfg.poly,
            prob.spec(T::from_f64(cfg.beta)),
            &prob,
        )?;
        Ok(AcPrepared {
            sys,
            assembly: t.elapsed(),
        })
    }

    fn factor(&self) -> Result<(AcFactorization<'_, T>, Duration)> {
        let t = Instant::now();
        let f = AcFactorization::new(&self.sys)?;
        Ok((f, t.elapsed()))
    }

    fn solve(&self, cfg: &RunConfig, nodes: &NodeSet) -> Result<SolveReport> {
        let (f, factor_time) = self.factor()?;
        self.solve_with(&f, factor_time, cfg, nodes)
    }

    fn solve_with(
        &self,
        f: &AcFactorization<'_, T>,
        factor_time: Duration,
        cfg: &RunConfig,
        nodes: &NodeSet,
    ) -> Result<SolveReport> {
        let prob = problem(cfg.problem);
        let beta = T::from_f64(cfg.beta);
        let t = Instant::now();
        let sol = f.solve(beta)?;
        let (y, u) = nodal_values(&self.sys, &sol);
        let solve_time = t.elapsed();
        let metrics = compute_metrics(nodes, &y, &u, &prob, beta)?;
        Ok(SolveReport {
            config: cfg.clone(),
            n_nodes: nodes.len(),
            metrics,
            kappa: sol.kappa,
            kappa_s: None,
            reliable: sol.reliable,
            iterations: 0,
            phases: Phases {
                weights: factor_time,
                assembly: self.assembly,
                solve: solve_time,
            },
        })
    }
}

/// All `beta` values at one shape; AC reuses one factorization.
fn run_column(template: &RunConfig, c: f64, betas: &[f64]) -> Vec<SweepEntry> {
    let configs: Vec<RunConfig> = betas
        .iter()
        .map(|&beta| RunConfig {
            c,
            beta,
            ..template.clone()
        })
        .collect();
    let fail = |msg: String| -> Vec<SweepEntry> {
        configs
            .iter()
            .map(|cfg| SweepEntry {
                config: cfg.clone(),
                outcome: Err(msg.clone()),
            })
            .collect()
    };
    if template.method != Method::Ac {
        return configs
            .iter()
            .map(|cfg| SweepEntry {
                config: cfg.clone(),
                outcome: run(cfg).map_err(|e| e.to_string()),
            })
            .collect();
    }
    let Some(first) = configs.first() else {
        return Vec::new();
    };
    let shared = first.validate().and_then(|_| nodes_for(first));
    let nodes = match shared {
        Ok(n) => n.with_all_dirichlet(),
        Err(e) => return fail(e.to_string()),
    };
    let result = match template.precision {
        Precision::Double => ac_column::<f64>(&configs, &nodes),
        Precision::Extended => ac_column::<DoubleDouble>(&configs, &nodes),
    };
    result.unwrap_or_else(|e| fail(e.to_string()))
}

fn ac_column<T: Real>(configs: &[RunConfig], nodes: &NodeSet) -> Result<Vec<SweepEntry>> {
    let prepared = AcPrepared::<T>::new(&configs[0], nodes)?;
    let (f, factor_time) = prepared.factor()?;
    Ok(configs
        .iter()
        .map(|cfg| SweepEntry {
            config: cfg.clone(),
            outcome: cfg
                .validate()
                .and_then(|_| prepared.solve_with(&f, factor_time, cfg, nodes))
                .map_err(|e| e.to_string()),
        })
        .collect())
}

/// Every `(c, beta)` pair, `c` outermost. Points run on up to `workers`
/// threads; the result order is the grid order regardless.
pub fn sweep(
    template: &RunConfig,
    cs: &[f64],
    betas: &[f64],
    workers: usize,
) -> Result<Vec<SweepEntry>> {
    if cs.is_empty() || betas.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let columns: Vec<Vec<SweepEntry>> = pool.install(|| {
        cs.par_iter()
            .map(|&c| run_column(template, c, betas))
            .collect()
    });
    Ok(columns.into_iter().flatten().collect())
}

/// For each `beta`, the reliable entry with the smallest state error (or
/// smallest cost when there is no exact solution).
pub fn best_per_beta(entries: &[SweepEntry]) -> Vec<&SolveReport> {
    let mut betas: Vec<f64> = entries.iter().map(|e| e.config.beta).collect();
    betas.sort_by(|a, b| b.total_cmp(a));
    betas.dedup();
    betas
        .into_iter()
        .filter_map(|beta| {
            entries
                .iter()
                .filter_map(|e| e.outcome.as_ref().ok())
                .filter(|r| r.config.beta == beta && r.reliable)
                .min_by(|a, b| score(a).total_cmp(&score(b)))
        })
        .collect()
}

fn score(r: &SolveReport) -> f64 {
    let v = r.metrics.re_y.unwrap_or(r.metrics.cost).hi();
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Wall time of one method at one size.
#[derive(Clone, Debug)]
pub struct TimingEntry {
    pub method: Method,
    pub n: usize,
    pub outcome: std::result::Result<SolveReport, String>,
}

impl TimingEntry {
    pub fn seconds(&self) -> Option<f64> {
        self.outcome
            .as_ref()
            .ok()
            .map(|r| r.total_time().as_secs_f64())
    }
}

/// Times each method at each `n` (ascending), sequentially so the
/// measurements do not compete for cores.
pub fn bench_timing(
    template: &RunConfig,
    methods: &[Method],
    ns: &[usize],
) -> Result<Vec<TimingEntry>> {
    if ns.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig(
            "benchmark sizes must be ascending".into(),
        ));
    }
    let mut out = Vec::new();
    for &n in ns {
        for &method in methods {
            let cfg = RunConfig {
                n,
                method,
                global_condition: false,
                ..template.clone()
            };
            out.push(TimingEntry {
                method,
                n,
                outcome: run(&cfg).map_err(|e| e.to_string()),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemId;

    fn small(method: Method) -> RunConfig {
        RunConfig {
            method,
            n: 150,
            n_local: 20,
            c: 0.05,
            beta: 1e-6,
            precision: Precision::Double,
            ..RunConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Ac, Method::LamDq, Method::LamLam] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("fem".parse::<Method>().is_err());
    }

    #[test]
    fn single_point_sweep_equals_run() {
        for m in [Method::Ac, Method::LamDq] {
            let cfg = small(m);
            let direct = run(&cfg).unwrap();
            let swept = sweep(&cfg, &[cfg.c], &[cfg.beta], 1).unwrap();
            assert_eq!(swept.len(), 1);
            assert!(swept[0].outcome.as_ref().unwrap().same_numbers(&direct));
        }
    }

    #[test]
    fn failures_are_recorded() {
        let cfg = RunConfig {
            n_local: 10_000,
            ..small(Method::LamDq)
        };
        let out = sweep(&cfg, &[0.05, 0.1], &[1e-6], 2).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|e| e.outcome.is_err()));
        assert_eq!(out[1].config.c, 0.1);
    }

    #[test]
    fn lam_lam_runs_without_exact_solution() {
        let cfg = RunConfig {
            problem: ProblemId::CornerTarget,
            ..small(Method::LamLam)
        };
        let r = run(&cfg).unwrap();
        assert!(r.metrics.re_y.is_none());
        assert!(r.metrics.cost.hi().is_finite());
        assert!(r.kappa_s.is_some());
    }

    #[test]
    fn best_prefers_reliable_minimum() {
        let cfg = small(Method::LamDq);
        let out = sweep(&cfg, &[0.02, 0.05], &[1e-4, 1e-6], 1).unwrap();
        let best = best_per_beta(&out);
        assert_eq!(best.len(), 2);
        assert_eq!(best[0].config.beta, 1e-4);
        for b in &best {
            let same_beta = out
                .iter()
                .filter_map(|e| e.outcome.as_ref().ok())
                .filter(|r| r.config.beta == b.config.beta && r.reliable);
            for r in same_beta {
                assert!(score(b) <= score(r));
            }
        }
    }

    #[test]
    fn bench_rejects_descending_sizes() {
        assert!(bench_timing(&small(Method::LamDq), &[Method::LamDq], &[200, 100]).is_err());
        let t = bench_timing(&small(Method::LamDq), &[Method::LamDq], &[120]).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t[0].seconds().unwrap() > 0.0);
    }
}
