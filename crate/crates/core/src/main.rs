use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use cbe::experiment::{self, ExperimentConfig, ExperimentKind};
use cbe::{Error, Sigma};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "cbe", version, about = "Monte Carlo laboratory for CβE characteristic polynomial extremes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write report.json and records.csv.
    Run(RunArgs),
    /// Run the deterministic kernel suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the Poisson-approximation bounds from a JSON moments file.
    Bound { moments: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    experiment: ExperimentKind,
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// 1 | real | i | imaginary
    #[arg(long)]
    sigma: Option<Sigma>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    k3: Option<f64>,
    #[arg(long)]
    k4: Option<f64>,
    #[arg(long)]
    k5: Option<f64>,
    #[arg(long)]
    k6: Option<f64>,
    #[arg(long)]
    k7: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mesh_factor: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    j_min: Option<u32>,
    #[arg(long)]
    j_max: Option<u32>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

impl RunArgs {
    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            experiment: Some(self.experiment),
            n: self.n,
            beta: self.beta,
            sigma: self.sigma,
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            k4: self.k4,
            k5: self.k5,
            k6: self.k6,
            k7: self.k7,
            replicas: self.replicas,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            mesh_factor: self.mesh_factor,
            dt: self.dt,
            j_min: self.j_min,
            j_max: self.j_max,
            eta: self.eta,
            lambda: self.lambda,
            delta: self.delta,
        }
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::MemoryBudget { .. } | Error::CapExceeded { .. } => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

fn run(args: RunArgs) -> Result<bool, Error> {
    let base = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.overridden_by(&args.flags());
    let rc = cfg.resolve()?;
    let report = experiment::run(&rc)?;
    for c in &report.checks {
        println!("{} {}: {:.3e} (threshold {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    match &cfg.out {
        Some(dir) => {
            report.write_to(dir)?;
            eprintln!("wrote {}", dir.display());
        }
        None => println!("{}", report.to_json()?),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify { seed, out } => {
            let checks = experiment::verify(seed);
            for c in &checks {
                println!("{} {}: {:.3e} (threshold {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            let ok = checks.iter().all(|c| c.pass);
            match out {
                Some(dir) => std::fs::create_dir_all(&dir)
                    .map_err(Error::from)
                    .and_then(|_| serde_json::to_string_pretty(&checks).map_err(Error::from))
                    .and_then(|s| std::fs::write(dir.join("verify.json"), s).map_err(Error::from))
                    .map(|_| ok),
                None => Ok(ok),
            }
        }
        Command::Bound { moments } => std::fs::read_to_string(&moments)
            .map_err(|e| Error::Config(format!("{}: {e}", moments.display())))
            .and_then(|t| experiment::evaluate_bounds_json(&t))
            .and_then(|o| {
                println!("{}", serde_json::to_string_pretty(&o)?);
                Ok(true)
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
