//! `hardy-lab`: command-line runs of the weighted Hardy laboratory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hardy_core::discretization::Domain;
use hardy_core::weights::WeightSpec;

use config::{Mu, RunConfig};

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default ./runs/<timestamp>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Weight, e.g. power:0.5, exppow:-1,1, powexp:2,1, const:1, expr:t^2*(2+cos(t)).
    #[arg(long, global = true)]
    weight: Option<WeightSpec>,
    /// interval:L or ball:N,R.
    #[arg(long, global = true)]
    domain: Option<Domain>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    eta0: Option<f64>,
    /// Number or "auto".
    #[arg(long, global = true)]
    mu: Option<Mu>,
    /// Nodes on the coarsest mesh.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Boundary cell size on the coarsest mesh.
    #[arg(long, global = true)]
    res: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Class, doubling, monotonicity and admissibility of a weight.
    Classify,
    /// Tabulate f, F and G with identity checks and the asymptotic fit of F.
    Profile {
        /// Profile parameter (same as --eta0).
        #[arg(long)]
        eta: Option<f64>,
        /// Smallest t the grid must reach.
        #[arg(long)]
        t_min: Option<f64>,
    },
    /// Minimise the quotient on the coarsest mesh.
    Minimize,
    /// Bracket the attainability threshold by bisection.
    LambdaStar {
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Concentration diagnostic along the ladder plus the supersolution trace.
    Diagnose {
        #[arg(long)]
        eta_probe: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long)]
        m: Option<f64>,
    },
    /// Closed form, quadrature and mesh values of the test-family quotient.
    Ueps {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Test-family parameter (at most eta0/2).
        #[arg(long)]
        eta: Option<f64>,
    },
}

#[derive(Parser, Debug)]
#[command(name = "hardy-lab", version, about = "Weighted Hardy inequality laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn build_config(common: &Common, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.weight {
        cfg.weight = v.clone();
    }
    if let Some(v) = common.domain {
        cfg.domain = v;
    }
    if let Some(v) = common.p {
        cfg.p = v;
    }
    if let Some(v) = common.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = common.eta0 {
        cfg.eta0 = Some(v);
    }
    if let Some(v) = common.mu {
        cfg.mu = v;
    }
    if let Some(v) = common.n {
        cfg.mesh.n = v;
    }
    if let Some(v) = common.levels {
        cfg.mesh.levels = v;
    }
    if let Some(v) = common.res {
        cfg.mesh.boundary_resolution = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.clone());
    }
    match command {
        Command::Profile { eta, t_min } => {
            if let Some(v) = eta {
                cfg.eta0 = Some(*v);
            }
            if let Some(v) = t_min {
                cfg.profile_t_min = *v;
            }
        }
        Command::LambdaStar { lo, hi, tol } => {
            if let Some(v) = lo {
                cfg.lambda_range.0 = *v;
            }
            if let Some(v) = hi {
                cfg.lambda_range.1 = *v;
            }
            if let Some(v) = tol {
                cfg.tolerances.lambda_bracket = *v;
            }
        }
        Command::Diagnose { eta_probe, s, m } => {
            if let Some(v) = eta_probe {
                cfg.eta_probe = *v;
            }
            if let Some(v) = s {
                cfg.s = v.clone();
            }
            if let Some(v) = m {
                cfg.m = *v;
            }
        }
        Command::Ueps { eps, eta } => {
            if let Some(v) = eps {
                cfg.eps = v.clone();
            }
            if let Some(v) = eta {
                cfg.eta = Some(*v);
            }
        }
        Command::Classify | Command::Minimize => {}
    }
    cfg.resolve()
}

fn run(cli: Cli) -> Result<commands::Outcome> {
    let cfg = build_config(&cli.common, &cli.command)?;
    let out = commands::output_dir(&cfg)?;
    match cli.command {
        Command::Classify => commands::classify(&cfg, &out),
        Command::Profile { .. } => commands::profile(&cfg, &out),
        Command::Minimize => commands::minimize(&cfg, &out),
        Command::LambdaStar { .. } => commands::lambda_star(&cfg, &out),
        Command::Diagnose { .. } => commands::diagnose(&cfg, &out),
        Command::Ueps { .. } => commands::ueps(&cfg, &out),
    }
}

fn main() -> ExitCode {
    // Exit code 2 is reserved for inconclusive verdicts, so usage errors
    // exit with 1 like every other failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(commands::Outcome::Verdict) => ExitCode::from(0),
        Ok(commands::Outcome::Inconclusive) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
