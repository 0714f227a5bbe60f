//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! to stderr (bypassing the capture) and the test fails if any criterion does.
//! Criteria run one after another so the timing comparison sees an idle machine.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbfoc::ac::{assemble_ac, solve_ac_monolithic, solve_ac_schur};
use rbfoc::dq::{defining_residual, dq_operator, dq_weights, recover_control_dq};
use rbfoc::geometry::{build_stencil, generate_nodes, Layout, NodeOptions, NodeSet};
use rbfoc::kernels::{eval_kernel_op, lift, Multiquadric, OpTag, OperatorSpec, PolyDegree};
use rbfoc::lam::{assemble_local, solve_control_lam, solve_state, LamOptions, Pass};
use rbfoc::problems::{problem, problem_1, problem_2, verify_exact_solution, ProblemId};
use rbfoc::runner::{best_per_beta, run, sweep, Method, RunConfig, SolveReport};
use rbfoc::{DoubleDouble, Precision, Real};

type D = DoubleDouble;
type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn halton(n: usize) -> NodeSet {
    generate_nodes(&NodeOptions::new(n, Layout::Halton)).unwrap()
}

fn base(problem: ProblemId, method: Method) -> RunConfig {
    RunConfig {
        problem,
        method,
        n: 622,
        n_local: 50,
        precision: Precision::Extended,
        ..RunConfig::default()
    }
}

fn re_y(r: &SolveReport) -> f64 {
    r.metrics.re_y.map_or(f64::INFINITY, |v| v.hi())
}

fn re_u(r: &SolveReport) -> f64 {
    r.metrics.re_u.map_or(f64::INFINITY, |v| v.hi())
}

/// Best reliable run per beta over a grid of shapes.
fn tuned(template: &RunConfig, cs: &[f64], betas: &[f64]) -> Vec<SolveReport> {
    let entries = sweep(template, cs, betas, 1).unwrap();
    best_per_beta(&entries).into_iter().cloned().collect()
}

fn at(reports: &[SolveReport], beta: f64) -> &SolveReport {
    reports
        .iter()
        .find(|r| r.config.beta == beta)
        .unwrap_or_else(|| panic!("no reliable run at beta = {beta:e}"))
}

fn exact_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<[D; 2]> = (0..100)
        .map(|_| lift([rng.gen::<f64>(), rng.gen::<f64>()]))
        .collect();
    let t = Instant::now();
    let worst = [1e-4, 1e-6, 1e-10]
        .iter()
        .map(|&b| verify_exact_solution(D::from(b), &pts).hi())
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-25 && secs < 1.0,
        format!("max residual {worst:.2e} in {secs:.3} s"),
    )
}

fn ac_accuracy() -> Outcome {
    let cs: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let best = tuned(&base(ProblemId::Poisson, Method::Ac), &cs, &[1e-6, 1e-10]);
    let (a, b) = (at(&best, 1e-6), at(&best, 1e-10));
    check(
        re_y(a) <= 1e-7 && re_y(b) <= 1e-9,
        format!(
            "RE_y {:.2e} (c = {}) at 1e-6, {:.2e} (c = {}) at 1e-10",
            re_y(a),
            a.config.c,
            re_y(b),
            b.config.c
        ),
    )
}

fn lam_dq_accuracy(tuned_run: &SolveReport) -> Outcome {
    check(
        re_y(tuned_run) <= 1e-5 && re_u(tuned_run) <= 1e-3,
        format!(
            "c = {}: RE_y {:.2e}, RE_u {:.2e}",
            tuned_run.config.c,
            re_y(tuned_run),
            re_u(tuned_run)
        ),
    )
}

fn global_condition() -> Outcome {
    let kappa_s = |beta: f64| {
        run(&RunConfig {
            beta,
            ..base(ProblemId::Poisson, Method::LamDq)
        })
        .unwrap()
        .kappa_s
        .unwrap()
    };
    let (small, large) = (kappa_s(1e-10), kappa_s(1e-4));
    check(
        small <= 10.0 && small < large,
        format!("cond(S) {small:.3e} at 1e-10, {large:.3e} at 1e-4"),
    )
}

fn preconditioner(tuned_run: &SolveReport) -> Outcome {
    let cfg = |precond| RunConfig {
        c: 5.0,
        precond,
        global_condition: false,
        ..base(ProblemId::Poisson, Method::LamDq)
    };
    let plain = run(&cfg(false)).unwrap();
    let pre = run(&cfg(true)).unwrap();
    check(
        pre.kappa.value <= plain.kappa.value * 1e-3 && re_y(&pre) <= 10.0 * re_y(tuned_run),
        format!(
            "cond {:.2e} -> {:.2e}; RE_y {:.2e} vs tuned {:.2e}",
            plain.kappa.value,
            pre.kappa.value,
            re_y(&pre),
            re_y(tuned_run)
        ),
    )
}

fn speedup() -> Outcome {
    let time = |method, c| {
        let r = run(&RunConfig {
            n: 2000,
            c,
            global_condition: false,
            ..base(ProblemId::Poisson, method)
        })
        .unwrap();
        r.total_time().as_secs_f64()
    };
    let local = time(Method::LamDq, 1.0);
    let global = time(Method::Ac, 0.2);
    let ratio = global / local;
    check(
        ratio >= 10.0,
        format!("AC {global:.1} s, LAM-DQ {local:.1} s, ratio {ratio:.1}"),
    )
}

fn penalty_trends() -> Outcome {
    let cs = [4e-4, 9e-4, 3e-3, 7e-3];
    let betas = [1e-2, 1e-6, 1e-10];
    let mut ok = true;
    let mut detail = Vec::new();
    for id in [ProblemId::BoundaryLayer, ProblemId::CornerTarget] {
        let mut template = base(id, Method::LamDq);
        template.global_condition = false;
        let best = tuned(&template, &cs, &betas);
        let cost = |b| at(&best, b).metrics.cost.hi();
        let misfit = |b| at(&best, b).metrics.misfit.hi();
        let ratio = cost(1e-10) / cost(1e-6);
        let drop = misfit(1e-10) / misfit(1e-2);
        ok &= (1e-5..=1e-3).contains(&ratio) && drop <= 1e-3;
        detail.push(format!(
            "problem {}: cost ratio {ratio:.2e}, misfit ratio {drop:.2e}",
            id.number()
        ));
    }
    check(ok, detail.join("; "))
}

/// One deterministic instance of each property suite.
fn property_samples() -> Outcome {
    let mut failures = Vec::new();
    let mut note = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };

    let k = Multiquadric::new(0.7).unwrap();
    let spec = OperatorSpec::convection(0.3, 1.1, 1.0);
    let (x, xj, h) = ([0.31, 0.62], [0.55, 0.2], 1e-4);
    let f = |dx: f64, dy: f64| k.eval([x[0] + dx - xj[0], x[1] + dy - xj[1]]);
    let lap = (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h);
    let gx = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
    let gy = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
    let fd = -spec.eps * lap + spec.wind[0] * gx + spec.wind[1] * gy;
    let exact = eval_kernel_op(OpTag::E, &spec, &k, x, xj);
    note("kernel FD", (fd - exact).abs() / (1.0 + exact.abs()) < 1e-6);

    let nodes = halton(300);
    let center = nodes.n_boundary() + 17;
    let spec_dd = problem_2().spec(D::from(1e-6));
    let kernel = Multiquadric::new(D::from(0.02)).unwrap();
    let row = dq_weights(&nodes, &kernel, PolyDegree::Linear, &spec_dd, center, 30).unwrap();
    note(
        "DQ residual",
        defining_residual(&nodes, &kernel, &spec_dd, &row).hi() <= 1e-10,
    );
    let apply = |g: &dyn Fn([f64; 2]) -> f64| {
        row.weights
            .iter()
            .zip(&row.neighbors)
            .fold(D::ZERO, |s, (&w, &j)| s + w * D::from(g(nodes.point(j))))
    };
    note(
        "DQ exactness",
        apply(&|_| 1.0).abs().hi() < 1e-12
            && (apply(&|p| p[0]) - spec_dd.wind[0]).abs().hi() < 1e-12
            && (apply(&|p| p[1]) - spec_dd.wind[1]).abs().hi() < 1e-12,
    );

    let spec2 = problem_2().spec(1e-6);
    let st = build_stencil(&nodes, center, 30).unwrap();
    let ls = assemble_local(
        &nodes,
        st,
        Multiquadric::new(0.05).unwrap(),
        PolyDegree::Linear,
        spec2,
        Pass::State,
    )
    .unwrap();
    let w = ls.weight_row(OpTag::M, None).unwrap();
    let lin = |p: [f64; 2]| 0.4 - 1.3 * p[0] + 0.8 * p[1];
    let e_lin = -1.3 * spec2.wind[0] + 0.8 * spec2.wind[1];
    let s: f64 = ls
        .stencil
        .members
        .iter()
        .enumerate()
        .map(|(pos, &id)| {
            let v = match ls.stencil.role(pos) {
                rbfoc::geometry::MemberRole::OperatorE => e_lin,
                _ => lin(nodes.point(id)),
            };
            w.weights[pos] * v
        })
        .sum();
    let target = lin(nodes.point(center));
    note(
        "LAM linear reproduction",
        (s - target).abs() <= 1e-7 * (1.0 + target.abs()),
    );

    let p1 = problem_1();
    let dirichlet = halton(100).with_all_dirichlet();
    let sys = assemble_ac(
        &dirichlet,
        Multiquadric::new(0.05).unwrap(),
        PolyDegree::Linear,
        p1.spec(1e-6),
        &p1,
    )
    .unwrap();
    let a = solve_ac_schur(&sys, 1e-6).unwrap();
    let b = solve_ac_monolithic(&sys, 1e-6).unwrap();
    let agree = [(&a.lambda, &b.lambda), (&a.mu, &b.mu)]
        .iter()
        .all(|(x, y)| {
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            x.iter()
                .zip(y.iter())
                .all(|(p, q)| (p - q).abs() <= 1e-8 * scale)
        });
    note("Schur vs monolithic", agree);

    let nodes = halton(622);
    let kernel = Multiquadric::new(1.0).unwrap();
    let spec1 = p1.spec(1e-6);
    let opts = LamOptions {
        n_local: 50,
        poly: PolyDegree::Linear,
        precondition: false,
        global_condition: false,
    };
    let state = solve_state(
        &nodes,
        kernel,
        spec1,
        &|x| p1.boundary(x),
        &|x| p1.target(x),
        opts,
    )
    .unwrap();
    let rows = dq_operator(&nodes, &kernel, PolyDegree::Linear, &spec1, 50).unwrap();
    let u_dq = recover_control_dq(&nodes, &rows, &state.values).unwrap();
    let u_lam = solve_control_lam(
        &nodes,
        kernel,
        spec1,
        &state.values,
        &|x| p1.target(x),
        opts,
    )
    .unwrap()
    .values;
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|t| t * t).sum::<f64>().sqrt();
    let rel =
        norm(&mut u_dq.iter().zip(&u_lam).map(|(p, q)| p - q)) / norm(&mut u_lam.iter().copied());
    note("LAM-DQ vs LAM-LAM", rel <= 1e-2);

    let template = RunConfig {
        n: 200,
        n_local: 20,
        precision: Precision::Double,
        ..base(ProblemId::Poisson, Method::LamDq)
    };
    let one = sweep(&template, &[0.5, 1.0], &[1e-4, 1e-8], 1).unwrap();
    let two = sweep(&template, &[0.5, 1.0], &[1e-4, 1e-8], 2).unwrap();
    note(
        "sweep determinism",
        one.iter().zip(&two).all(|(p, q)| {
            p.config == q.config
                && p.outcome
                    .as_ref()
                    .unwrap()
                    .same_numbers(q.outcome.as_ref().unwrap())
        }),
    );

    if failures.is_empty() {
        Ok(format!("all samples hold (control difference {rel:.1e})"))
    } else {
        Err(format!("failed: {}", failures.join(", ")))
    }
}

fn large_smoke() -> Outcome {
    let nodes = halton(5000);
    let p = problem(ProblemId::BoundaryLayer);
    let beta = D::from(1e-10);
    let kernel = Multiquadric::new(D::from(7e-3)).unwrap();
    let spec = p.spec(beta);
    let opts = LamOptions {
        n_local: 50,
        poly: PolyDegree::Linear,
        precondition: false,
        global_condition: false,
    };
    let t = Instant::now();
    let state = solve_state(
        &nodes,
        kernel,
        spec,
        &|x| p.boundary(x),
        &|x| p.target(x),
        opts,
    )
    .map_err(|e| e.to_string())?;
    let rows =
        dq_operator(&nodes, &kernel, PolyDegree::Linear, &spec, 50).map_err(|e| e.to_string())?;
    let u = recover_control_dq(&nodes, &rows, &state.values).map_err(|e| e.to_string())?;
    let on_boundary = (0..nodes.len())
        .filter(|&i| nodes.is_boundary(i))
        .map(|i| u[i].abs().hi())
        .fold(0.0, f64::max);
    let finite = u.iter().chain(&state.values).all(|v| v.is_finite());
    check(
        on_boundary == 0.0 && finite,
        format!(
            "{} nodes in {:.1} s, max |u| on boundary {on_boundary:e}",
            nodes.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

#[test]
fn acceptance() {
    let lam_tuned = tuned(
        &RunConfig {
            global_condition: false,
            ..base(ProblemId::Poisson, Method::LamDq)
        },
        &[0.5, 1.0, 2.0],
        &[1e-6],
    );
    let lam_tuned = at(&lam_tuned, 1e-6).clone();

    let criteria: Vec<Criterion> = vec![
        ("C1 exact solution identity", Box::new(exact_identity)),
        ("C2 AC accuracy, problem 1", Box::new(ac_accuracy)),
        (
            "C3 LAM-DQ accuracy, problem 1",
            Box::new(|| lam_dq_accuracy(&lam_tuned)),
        ),
        ("C4 global matrix conditioning", Box::new(global_condition)),
        (
            "C5 shape-perturbation preconditioner",
            Box::new(|| preconditioner(&lam_tuned)),
        ),
        ("C6 LAM-DQ speedup over AC, n = 2000", Box::new(speedup)),
        (
            "C7 penalty trends, problems 2 and 3",
            Box::new(penalty_trends),
        ),
        ("C8 property samples", Box::new(property_samples)),
        ("smoke n = 5000, problem 2", Box::new(large_smoke)),
    ];
    let mut failed = Vec::new();
    for (name, criterion) in &criteria {
        let (tag, detail) = match criterion() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(*name);
                ("FAIL", d)
            }
        };
        let mut err = std::io::stderr().lock();
        writeln!(err, "{tag} {name}: {detail}").unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
