use std::process::Command;

use rbfoc::dq::{dq_operator, recover_control_dq};
use rbfoc::geometry::{generate_nodes, Layout, NodeOptions};
use rbfoc::kernels::{Multiquadric, PolyDegree};
use rbfoc::lam::{solve_control_lam, solve_state, LamOptions};
use rbfoc::problems::problem_1;
use rbfoc::runner::{read_csv, run, sweep, write_csv, Method, RunConfig};
use rbfoc::Precision;

fn small(method: Method) -> RunConfig {
    RunConfig {
        method,
        n: 200,
        n_local: 20,
        precision: Precision::Double,
        ..RunConfig::default()
    }
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn local_controls_agree() {
    let nodes = generate_nodes(&NodeOptions::new(622, Layout::Halton)).unwrap();
    let p = problem_1();
    let beta = 1e-6;
    let kernel = Multiquadric::new(1.0).unwrap();
    let spec = p.spec(beta);
    let opts = LamOptions {
        n_local: 50,
        poly: PolyDegree::Linear,
        precondition: false,
        global_condition: false,
    };
    let state = solve_state(
        &nodes,
        kernel,
        spec,
        &|x| p.boundary(x),
        &|x| p.target(x),
        opts,
    )
    .unwrap();
    let rows = dq_operator(&nodes, &kernel, PolyDegree::Linear, &spec, 50).unwrap();
    let u_dq = recover_control_dq(&nodes, &rows, &state.values).unwrap();
    let u_lam = solve_control_lam(&nodes, kernel, spec, &state.values, &|x| p.target(x), opts)
        .unwrap()
        .values;
    let diff = l2(u_dq.iter().zip(&u_lam).map(|(a, b)| a - b));
    let rel = diff / l2(u_lam.iter().copied());
    assert!(rel <= 1e-2, "relative L2 difference {rel:e}");
}

#[test]
fn repeated_runs_are_identical() {
    for method in [Method::Ac, Method::LamDq, Method::LamLam] {
        let cfg = RunConfig {
            c: 0.3,
            ..small(method)
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert!(a.same_numbers(&b), "{method}");
    }
}

#[test]
fn parallel_sweeps_are_deterministic() {
    let cs = [0.2, 0.5, 1.0];
    let betas = [1e-4, 1e-6, 1e-10];
    for method in [Method::Ac, Method::LamDq] {
        let template = small(method);
        let serial = sweep(&template, &cs, &betas, 1).unwrap();
        let parallel = sweep(&template, &cs, &betas, 3).unwrap();
        assert_eq!(serial.len(), 9);
        for (s, p) in serial.iter().zip(&parallel) {
            assert_eq!(s.config, p.config);
            let (s, p) = (s.outcome.as_ref().unwrap(), p.outcome.as_ref().unwrap());
            assert!(
                s.same_numbers(p),
                "{method} c={} beta={}",
                s.config.c,
                s.config.beta
            );
        }
    }
}

#[test]
fn misfit_shrinks_with_beta() {
    let template = RunConfig {
        c: 0.3,
        ..small(Method::Ac)
    };
    let entries = sweep(&template, &[0.3], &[1e-2, 1e-4, 1e-6], 1).unwrap();
    let misfits: Vec<f64> = entries
        .iter()
        .map(|e| e.outcome.as_ref().unwrap().metrics.misfit.hi())
        .collect();
    assert!(misfits.windows(2).all(|w| w[1] < w[0]), "{misfits:?}");
}

#[test]
fn sweep_csv_survives_a_file() {
    let template = RunConfig {
        precision: Precision::Extended,
        ..small(Method::LamDq)
    };
    let entries = sweep(&template, &[0.5, 1.0], &[1e-6], 2).unwrap();
    let path = std::env::temp_dir().join(format!("rbfoc-sweep-{}.csv", std::process::id()));
    write_csv(&entries, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back.len(), entries.len());
    for (a, b) in entries.iter().zip(&back) {
        assert_eq!(a.config, b.config);
        let (a, b) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.phases, b.phases);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rbfoc"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_solves_and_rejects_bad_input() {
    let out = cli(&[
        "solve",
        "--n",
        "150",
        "--nk",
        "15",
        "--precision",
        "double",
        "--c",
        "0.5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("RE_y"), "{text}");

    let out = cli(&["solve", "--method", "ac", "--precond", "on"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["solve", "--c", "0.5,1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_writes_nodes() {
    let out = cli(&["nodes", "--n", "49", "--layout", "grid"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert_eq!(
        cli(&["nodes", "--n", "40", "--layout", "grid"])
            .status
            .code(),
        Some(2)
    );
}
