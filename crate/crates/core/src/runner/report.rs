//! CSV and markdown output.
//!
//! Sweep CSV header:
//!
//! ```text
//! problem,method,n,nk,c,beta,precision,precond,layout,seed,poly,kappa_s_on,
//! n_nodes,re_y,re_u,misfit,control_norm,cost,kappa,kappa_estimated,kappa_s,
//! reliable,iterations,t_weights,t_assembly,t_solve,t_total,error
//! ```
//!
//! Metric columns hold double-double values as `hi` or `hi+lo`, which parse
//! back bit for bit; times are seconds with nanosecond digits. Result columns
//! are empty for failed points and `error` is empty for successful ones.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{best_per_beta, Method, RunConfig, SolveReport, SweepEntry, TimingEntry};
use crate::error::{Error, Result};
use crate::geometry::Layout;
use crate::kernels::PolyDegree;
use crate::lam::Phases;
use crate::linalg::Condition;
use crate::precision::{DoubleDouble, Precision};
use crate::problems::{Metrics, ProblemId};

#[derive(Serialize, Deserialize)]
struct Row {
    problem: ProblemId,
    method: Method,
    n: usize,
    nk: usize,
    c: f64,
    beta: f64,
    precision: Precision,
    precond: bool,
    layout: Layout,
    seed: u64,
    poly: PolyDegree,
    kappa_s_on: bool,
    n_nodes: Option<usize>,
    re_y: Option<String>,
    re_u: Option<String>,
    misfit: Option<String>,
    control_norm: Option<String>,
    cost: Option<String>,
    kappa: Option<f64>,
    kappa_estimated: Option<bool>,
    kappa_s: Option<f64>,
    reliable: Option<bool>,
    iterations: Option<usize>,
    t_weights: Option<String>,
    t_assembly: Option<String>,
    t_solve: Option<String>,
    t_total: Option<String>,
    error: Option<String>,
}

fn seconds(d: Duration) -> String {
    format!("{}.{:09}", d.as_secs(), d.subsec_nanos())
}

fn parse_seconds(s: &str) -> Result<Duration> {
    let bad = || Error::InvalidConfig(format!("bad duration '{s}'"));
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() > 9 {
        return Err(bad());
    }
    let secs: u64 = whole.parse().map_err(|_| bad())?;
    let nanos: u32 = format!("{frac:0<9}").parse().map_err(|_| bad())?;
    Ok(Duration::new(secs, nanos))
}

fn dd(s: &Option<String>, column: &str) -> Result<DoubleDouble> {
    let s = s
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("missing {column}")))?;
    DoubleDouble::parse_exact(s).ok_or_else(|| Error::InvalidConfig(format!("bad {column} '{s}'")))
}

fn required<T: Copy>(v: Option<T>, column: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidConfig(format!("missing {column}")))
}

impl Row {
    fn new(entry: &SweepEntry) -> Row {
        let c = &entry.config;
        let mut row = Row {
            problem: c.problem,
            method: c.method,
            n: c.n,
            nk: c.n_local,
            c: c.c,
            beta: c.beta,
            precision: c.precision,
            precond: c.precond,
            layout: c.layout,
            seed: c.seed,
            poly: c.poly,
            kappa_s_on: c.global_condition,
            n_nodes: None,
            re_y: None,
            re_u: None,
            misfit: None,
            control_norm: None,
            cost: None,
            kappa: None,
            kappa_estimated: None,
            kappa_s: None,
            reliable: None,
            iterations: None,
            t_weights: None,
            t_assembly: None,
            t_solve: None,
            t_total: None,
            error: None,
        };
        match &entry.outcome {
            Err(msg) => row.error = Some(msg.clone()),
            Ok(r) => {
                let m = &r.metrics;
                row.n_nodes = Some(r.n_nodes);
                row.re_y = m.re_y.map(DoubleDouble::to_exact_string);
                row.re_u = m.re_u.map(DoubleDouble::to_exact_string);
                row.misfit = Some(m.misfit.to_exact_string());
                row.control_norm = Some(m.control_norm.to_exact_string());
                row.cost = Some(m.cost.to_exact_string());
                row.kappa = Some(r.kappa.value);
                row.kappa_estimated = Some(r.kappa.estimated);
                row.kappa_s = r.kappa_s;
                row.reliable = Some(r.reliable);
                row.iterations = Some(r.iterations);
                row.t_weights = Some(seconds(r.phases.weights));
                row.t_assembly = Some(seconds(r.phases.assembly));
                row.t_solve = Some(seconds(r.phases.solve));
                row.t_total = Some(seconds(r.total_time()));
            }
        }
        row
    }

    fn into_entry(self) -> Result<SweepEntry> {
        let config = RunConfig {
            problem: self.problem,
            method: self.method,
            n: self.n,
            n_local: self.nk,
            c: self.c,
            beta: self.beta,
            precision: self.precision,
            precond: self.precond,
            layout: self.layout,
            seed: self.seed,
            poly: self.poly,
            global_condition: self.kappa_s_on,
        };
        if let Some(msg) = self.error {
            return Ok(SweepEntry {
                config,
                outcome: Err(msg),
            });
        }
        let opt_dd = |s: &Option<String>, col: &str| s.as_ref().map(|_| dd(s, col)).transpose();
        let time = |s: &Option<String>, col: &str| {
            s.as_deref()
                .ok_or_else(|| Error::InvalidConfig(format!("missing {col}")))
                .and_then(parse_seconds)
        };
        let report = SolveReport {
            config: config.clone(),
            n_nodes: required(self.n_nodes, "n_nodes")?,
            metrics: Metrics {
                misfit: dd(&self.misfit, "misfit")?,
                control_norm: dd(&self.control_norm, "control_norm")?,
                re_y: opt_dd(&self.re_y, "re_y")?,
                re_u: opt_dd(&self.re_u, "re_u")?,
                cost: dd(&self.cost, "cost")?,
            },
            kappa: Condition {
                value: required(self.kappa, "kappa")?,
                estimated: required(self.kappa_estimated, "kappa_estimated")?,
            },
            kappa_s: self.kappa_s,
            reliable: required(self.reliable, "reliable")?,
            iterations: required(self.iterations, "iterations")?,
            phases: Phases {
                weights: time(&self.t_weights, "t_weights")?,
                assembly: time(&self.t_assembly, "t_assembly")?,
                solve: time(&self.t_solve, "t_solve")?,
            },
        };
        Ok(SweepEntry {
            config,
            outcome: Ok(report),
        })
    }
}

pub fn write_csv<W: Write>(entries: &[SweepEntry], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in entries {
        out.serialize(Row::new(e))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<SweepEntry>> {
    csv::Reader::from_reader(r)
        .deserialize::<Row>()
        .map(|row| row?.into_entry())
        .collect()
}

/// `m:ss` with the minutes unbounded.
pub fn format_mm_ss(d: Duration) -> String {
    let s = d.as_secs_f64().round() as u64;
    format!("{}:{:02}", s / 60, s % 60)
}

fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

/// Best reliable shape per `(method, beta)` as columns and the quantities
/// as rows. Unreliable or failed columns are marked.
pub fn sweep_markdown(entries: &[SweepEntry]) -> String {
    let mut methods: Vec<Method> = Vec::new();
    for e in entries {
        if !methods.contains(&e.config.method) {
            methods.push(e.config.method);
        }
    }
    let mut columns: Vec<(String, Option<&SolveReport>)> = Vec::new();
    for &m in &methods {
        let of_method: Vec<SweepEntry> = entries
            .iter()
            .filter(|e| e.config.method == m)
            .cloned()
            .collect();
        let mut betas: Vec<f64> = of_method.iter().map(|e| e.config.beta).collect();
        betas.sort_by(|a, b| b.total_cmp(a));
        betas.dedup();
        let best = best_per_beta(&of_method);
        for beta in betas {
            let pick = best
                .iter()
                .find(|r| r.config.beta == beta)
                .map(|r| r.config.c);
            let report = pick.and_then(|c| {
                entries
                    .iter()
                    .filter_map(|e| e.outcome.as_ref().ok())
                    .find(|r| r.config.method == m && r.config.beta == beta && r.config.c == c)
            });
            columns.push((format!("{} β={beta:e}", m.label()), report));
        }
    }
    let mut s = String::from("| |");
    for (head, _) in &columns {
        let _ = write!(s, " {head} |");
    }
    s.push_str("\n|---|");
    for _ in &columns {
        s.push_str("---|");
    }
    s.push('\n');
    type Cell = fn(&SolveReport) -> String;
    let rows: [(&str, Cell); 9] = [
        ("c", |r| format!("{:e}", r.config.c)),
        ("RE_y", |r| {
            r.metrics.re_y.map(|v| sci(v.hi())).unwrap_or("-".into())
        }),
        ("RE_u", |r| {
            r.metrics.re_u.map(|v| sci(v.hi())).unwrap_or("-".into())
        }),
        ("‖y−ŷ‖", |r| sci(r.metrics.misfit.hi())),
        ("‖u‖", |r| sci(r.metrics.control_norm.hi())),
        ("Cost", |r| sci(r.metrics.cost.hi())),
        ("κ", |r| sci(r.kappa.value)),
        ("κ(S)", |r| r.kappa_s.map(sci).unwrap_or("-".into())),
        ("Time", |r| format_mm_ss(r.total_time())),
    ];
    for (name, cell) in rows {
        let _ = write!(s, "| {name} |");
        for (_, r) in &columns {
            let v = r.map(cell).unwrap_or_else(|| "no reliable run".into());
            let _ = write!(s, " {v} |");
        }
        s.push('\n');
    }
    s
}

pub fn write_bench_csv<W: Write>(entries: &[TimingEntry], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "n", "seconds", "mm_ss", "error"])?;
    for e in entries {
        let (secs, mmss, err) = match &e.outcome {
            Ok(r) => (
                format!("{:.3}", r.total_time().as_secs_f64()),
                format_mm_ss(r.total_time()),
                String::new(),
            ),
            Err(msg) => (String::new(), String::new(), msg.clone()),
        };
        out.write_record([e.method.as_str(), &e.n.to_string(), &secs, &mmss, &err])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per `n`, one column per method, plus the AC/LAM-DQ ratio when
/// both were timed.
pub fn bench_markdown(entries: &[TimingEntry]) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for e in entries {
        if !methods.contains(&e.method) {
            methods.push(e.method);
        }
        if !ns.contains(&e.n) {
            ns.push(e.n);
        }
    }
    let ratio = methods.contains(&Method::Ac) && methods.contains(&Method::LamDq);
    let mut s = String::from("| n |");
    for m in &methods {
        let _ = write!(s, " {} |", m.label());
    }
    if ratio {
        s.push_str(" AC / LAM-DQ |");
    }
    s.push_str("\n|---|");
    for _ in 0..methods.len() + usize::from(ratio) {
        s.push_str("---|");
    }
    s.push('\n');
    let secs = |m: Method, n: usize| {
        entries
            .iter()
            .find(|e| e.method == m && e.n == n)
            .and_then(TimingEntry::seconds)
    };
    for &n in &ns {
        let _ = write!(s, "| {n} |");
        for &m in &methods {
            let cell = match secs(m, n) {
                Some(t) => format!("{t:.3} s ({})", format_mm_ss(Duration::from_secs_f64(t))),
                None => "failed".into(),
            };
            let _ = write!(s, " {cell} |");
        }
        if ratio {
            let cell = match (secs(Method::Ac, n), secs(Method::LamDq, n)) {
                (Some(a), Some(l)) if l > 0.0 => format!("{:.1}", a / l),
                _ => "-".into(),
            };
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cfg: RunConfig) -> SolveReport {
        let third = DoubleDouble::from(1.0) / DoubleDouble::from(3.0);
        SolveReport {
            config: cfg,
            n_nodes: 622,
            metrics: Metrics {
                misfit: third,
                control_norm: DoubleDouble::from(2.5),
                re_y: Some(third * DoubleDouble::from(1e-9)),
                re_u: None,
                cost: DoubleDouble::from(0.1) * third,
            },
            kappa: Condition {
                value: 1.234_567_890_123e23,
                estimated: true,
            },
            kappa_s: Some(1.39),
            reliable: true,
            iterations: 17,
            phases: Phases {
                weights: Duration::new(3, 141_592_653),
                assembly: Duration::from_nanos(7),
                solve: Duration::from_millis(65),
            },
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = RunConfig::default();
        let entries = vec![
            SweepEntry {
                config: cfg.clone(),
                outcome: Ok(report(cfg.clone())),
            },
            SweepEntry {
                config: RunConfig {
                    c: 0.7,
                    ..cfg.clone()
                },
                outcome: Err("matrix is singular, \"quoted\"".into()),
            },
        ];
        let mut buf = Vec::new();
        write_csv(&entries, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("problem,method,n,nk,c,beta,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), entries);
    }

    #[test]
    fn durations_parse() {
        assert_eq!(parse_seconds("2.5").unwrap(), Duration::from_millis(2500));
        assert_eq!(
            parse_seconds(&seconds(Duration::new(61, 5))).unwrap(),
            Duration::new(61, 5)
        );
        assert!(parse_seconds("1.0000000001").is_err());
    }

    #[test]
    fn mm_ss() {
        assert_eq!(format_mm_ss(Duration::from_secs(3549)), "59:09");
        assert_eq!(format_mm_ss(Duration::from_millis(65_400)), "1:05");
    }

    #[test]
    fn markdown_layouts() {
        let cfg = RunConfig::default();
        let entries = vec![SweepEntry {
            config: cfg.clone(),
            outcome: Ok(report(cfg)),
        }];
        let table = sweep_markdown(&entries);
        assert!(table.contains("LAM-DQ β=1e-6"));
        assert!(table.contains("| κ(S) | 1.39e0 |"));
        let timing = vec![
            TimingEntry {
                method: Method::Ac,
                n: 500,
                outcome: Err("x".into()),
            },
            TimingEntry {
                method: Method::LamDq,
                n: 500,
                outcome: Ok(report(RunConfig::default())),
            },
        ];
        let md = bench_markdown(&timing);
        assert!(md.contains("| 500 | failed | 3.207 s (0:03) | - |"), "{md}");
    }
}
