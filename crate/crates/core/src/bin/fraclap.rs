use clap::{Parser, Subcommand};
use fraclap::checks::{all_checks, list_checks, run_check, CheckContext, CheckOutcome};
use fraclap::experiment::{run_experiment, ExperimentConfig};
use fraclap::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Fractional Laplace-Beltrami experiments and acceptance checks")]
struct Cli {
    /// Worker threads for the quadrature rows.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random ensembles (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sweep and checks described by an INI config.
    Run { config: PathBuf },
    /// Run one acceptance check by name, or `all`.
    Check { name: String },
    /// List the acceptance checks, optionally of one module.
    List {
        #[arg(long)]
        module: Option<String>,
    },
}

fn fail(kind: &str, e: &Error) -> ExitCode {
    println!("error kind={kind} message={:?}", e.to_string());
    ExitCode::from(1)
}

fn report(outcomes: &[CheckOutcome]) -> ExitCode {
    for o in outcomes {
        println!("{}", o.line());
        for (k, v) in &o.metrics {
            println!("    {k} = {v:.6e}");
        }
        for n in &o.notes {
            println!("    note: {n}");
        }
    }
    if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail("config", &Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
    }
    match cli.cmd {
        Cmd::List { module } => {
            for c in list_checks(module.as_deref()) {
                println!("{:<24} criterion {:>2}  {:<13} {}", c.name, c.criterion, c.module, c.summary);
            }
            ExitCode::SUCCESS
        }
        Cmd::Check { name } => {
            let ctx = CheckContext { seed: cli.seed.unwrap_or(CheckContext::default().seed) };
            let names: Vec<&str> = if name == "all" {
                all_checks().iter().map(|c| c.name).collect()
            } else {
                vec![name.as_str()]
            };
            let mut outcomes = Vec::new();
            for n in names {
                match run_check(n, &ctx) {
                    Ok(o) => outcomes.push(o),
                    Err(e @ Error::InvalidParameter(_)) => return fail("validation", &e),
                    Err(e) => return fail("runtime", &e),
                }
            }
            report(&outcomes)
        }
        Cmd::Run { config } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail("config", &e),
            };
            if let Some(out) = cli.out {
                cfg.output = out;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            match run_experiment(&cfg) {
                Ok(rep) => {
                    for f in &rep.files {
                        println!("wrote {}", f.display());
                    }
                    report(&rep.checks)
                }
                Err(e @ (Error::Config(_) | Error::InvalidParameter(_) | Error::Domain(_))) => fail("validation", &e),
                Err(e) => fail("runtime", &e),
            }
        }
    }
}
