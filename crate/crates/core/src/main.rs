use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rbfoc::geometry::{generate_nodes, Layout, NodeOptions};
use rbfoc::runner::{
    bench_markdown, bench_timing, best_per_beta, format_mm_ss, run, sweep, sweep_markdown,
    write_bench_csv, write_csv, Method, RunConfig, SweepEntry,
};
use rbfoc::{Error, Result};

/// Meshfree RBF solvers for convection-diffusion optimal control.
#[derive(Parser)]
#[command(name = "rbfoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and print its report.
    Solve {
        #[command(flatten)]
        opts: RunArgs,
        /// Also write the report as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (c, beta) pair; --c and --beta take comma-separated lists.
    Sweep {
        #[command(flatten)]
        opts: RunArgs,
        /// Concurrent grid points.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// CSV destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Markdown table of the best reliable shape per beta.
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Wall time per method and node count.
    Bench {
        #[command(flatten)]
        opts: RunArgs,
        /// Methods to time, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "ac,lam-dq")]
        methods: Vec<Method>,
        /// Node counts, ascending and comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
        ns: Vec<usize>,
        /// CSV destination; the markdown table goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a node set as CSV.
    Nodes {
        #[arg(long, default_value_t = 622)]
        n: usize,
        #[arg(long, default_value = "halton")]
        layout: Layout,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run parameters; flags override `--config`, which overrides the defaults.
#[derive(Args)]
struct RunArgs {
    /// `key = value` file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1, 2 or 3.
    #[arg(long)]
    problem: Option<String>,
    /// ac, lam-dq or lam-lam.
    #[arg(long)]
    method: Option<String>,
    /// Target number of nodes.
    #[arg(long)]
    n: Option<String>,
    /// Stencil size.
    #[arg(long)]
    nk: Option<String>,
    /// Shape parameter(s).
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    /// Penalty parameter(s).
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// double or extended.
    #[arg(long)]
    precision: Option<String>,
    /// on or off.
    #[arg(long)]
    precond: Option<String>,
    /// halton or grid.
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Polynomial augmentation: none, 0 or 1.
    #[arg(long)]
    poly: Option<String>,
    /// Compute cond(S) for local methods: on or off.
    #[arg(long)]
    kappa_s: Option<String>,
}

impl RunArgs {
    /// Configuration plus the requested shape and penalty lists.
    fn resolve(&self) -> Result<(RunConfig, Vec<f64>, Vec<f64>)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("method", &self.method),
            ("n", &self.n),
            ("nk", &self.nk),
            ("precision", &self.precision),
            ("precond", &self.precond),
            ("layout", &self.layout),
            ("seed", &self.seed),
            ("poly", &self.poly),
            ("kappa_s", &self.kappa_s),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        let cs = if self.c.is_empty() {
            vec![cfg.c]
        } else {
            self.c.clone()
        };
        let betas = if self.beta.is_empty() {
            vec![cfg.beta]
        } else {
            self.beta.clone()
        };
        cfg.c = cs[0];
        cfg.beta = betas[0];
        cfg.validate()?;
        Ok((cfg, cs, betas))
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn print_report(entry: &SweepEntry) {
    let c = &entry.config;
    println!(
        "problem {}  method {}  n {}  nk {}  c {:e}  beta {:e}  precision {}  precond {}",
        c.problem,
        c.method,
        c.n,
        c.n_local,
        c.c,
        c.beta,
        c.precision.as_str(),
        if c.precond { "on" } else { "off" }
    );
    let Ok(r) = &entry.outcome else {
        return;
    };
    let m = &r.metrics;
    let opt =
        |v: Option<rbfoc::DoubleDouble>| v.map_or("-".to_string(), |v| format!("{:.6e}", v.hi()));
    println!("nodes        {}", r.n_nodes);
    println!("RE_y         {}", opt(m.re_y));
    println!("RE_u         {}", opt(m.re_u));
    println!("|y - target| {:.6e}", m.misfit.hi());
    println!("|u|          {:.6e}", m.control_norm.hi());
    println!("cost         {:.6e}", m.cost.hi());
    println!(
        "kappa        {:.3e}{}",
        r.kappa.value,
        if r.reliable {
            ""
        } else {
            "  (unreliable: exceeds 1/u)"
        }
    );
    if let Some(ks) = r.kappa_s {
        println!("kappa(S)     {ks:.3e}");
    }
    if c.method != Method::Ac {
        println!("iterations   {}", r.iterations);
    }
    let t = r.total_time();
    println!(
        "time         {:.3} s ({})  [weights {:.3}, assembly {:.3}, solve {:.3}]",
        t.as_secs_f64(),
        format_mm_ss(t),
        r.phases.weights.as_secs_f64(),
        r.phases.assembly.as_secs_f64(),
        r.phases.solve.as_secs_f64()
    );
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { opts, out } => {
            let (cfg, cs, betas) = opts.resolve()?;
            if cs.len() > 1 || betas.len() > 1 {
                return Err(Error::InvalidConfig(
                    "solve takes a single c and beta; use sweep for lists".into(),
                ));
            }
            let entry = SweepEntry {
                outcome: run(&cfg).map_err(|e| e.to_string()),
                config: cfg,
            };
            print_report(&entry);
            if let Some(path) = &out {
                write_csv(std::slice::from_ref(&entry), File::create(path)?)?;
            }
            if let Err(msg) = &entry.outcome {
                eprintln!("error: {msg}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Sweep {
            opts,
            workers,
            out,
            markdown,
        } => {
            let (cfg, cs, betas) = opts.resolve()?;
            let entries = sweep(&cfg, &cs, &betas, workers)?;
            write_csv(&entries, sink(&out)?)?;
            if let Some(path) = markdown {
                File::create(path)?.write_all(sweep_markdown(&entries).as_bytes())?;
            }
            for e in &entries {
                if let Err(msg) = &e.outcome {
                    eprintln!("c={:e} beta={:e}: {msg}", e.config.c, e.config.beta);
                }
            }
            for best in best_per_beta(&entries) {
                eprintln!(
                    "best for beta={:e}: c={:e}",
                    best.config.beta, best.config.c
                );
            }
            Ok(entries.iter().any(|e| e.outcome.is_ok()))
        }
        Command::Bench {
            opts,
            methods,
            ns,
            out,
        } => {
            let (cfg, _, _) = opts.resolve()?;
            let entries = bench_timing(&cfg, &methods, &ns)?;
            if let Some(path) = &out {
                write_bench_csv(&entries, File::create(path)?)?;
            }
            print!("{}", bench_markdown(&entries));
            Ok(entries.iter().all(|e| e.outcome.is_ok()))
        }
        Command::Nodes {
            n,
            layout,
            seed,
            out,
        } => {
            let nodes = generate_nodes(&NodeOptions::new(n, layout).seed(seed))?;
            nodes.write_csv(sink(&out)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
