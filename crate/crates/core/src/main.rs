use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fnls::experiment::{self, ExperimentConfig};
use fnls::Error;

#[derive(Parser)]
#[command(name = "fnls", version, about = "Ground states and blow-up runs for the focusing fractional NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the dilation factor of the initial data.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Override any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut overrides = self.set.clone();
        if let Some(l) = self.lambda0 {
            overrides.push(format!("lambda0={l}"));
        }
        Ok(ExperimentConfig::load_with_overrides(&self.config, &overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state and write it with a JSON summary.
    GroundState(Common),
    /// Evolve the dilated ground state without preconditions.
    Evolve(Common),
    /// Strong-instability run from the dilated ground state.
    Instability {
        #[command(flatten)]
        common: Common,
        /// Run even when the parameters are outside the theorem regime.
        #[arg(long)]
        allow_any_regime: bool,
    },
    /// Tabulate S_omega and I along the dilation orbit of the ground state.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated dilation factors.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.9,1.0,1.1,2.0")]
        lambdas: Vec<f64>,
    },
    /// Run the invariant checks and write a JSON report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of checks; an empty string selects none.
        #[arg(long)]
        checks: Option<String>,
    },
}

fn configure_threads(cfg: &ExperimentConfig) {
    let threads = if cfg.deterministic {
        Some(1)
    } else {
        std::env::var("FNLS_THREADS").ok().and_then(|v| v.parse::<usize>().ok())
    };
    if let Some(n) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized");
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GroundState(c) => {
            let cfg = c.load()?;
            configure_threads(&cfg);
            let gs = experiment::cmd_ground_state(&cfg)?;
            println!(
                "ground state: {} iterations, residual {:.3e}, Pohozaev {:.3e}, S_omega {}",
                gs.iterations,
                gs.final_residual,
                gs.pohozaev.max(),
                gs.s_omega_value
            );
        }
        Command::Evolve(c) => {
            let cfg = c.load()?;
            configure_threads(&cfg);
            let r = experiment::cmd_evolve(&cfg)?;
            println!("{:?} at t = {} after {} steps", r.outcome.status, r.outcome.t_end, r.outcome.steps);
        }
        Command::Instability { common, allow_any_regime } => {
            let cfg = common.load()?;
            configure_threads(&cfg);
            let r = experiment::cmd_instability(&cfg, allow_any_regime)?;
            println!("{:?} at t = {} after {} steps", r.outcome.status, r.outcome.t_end, r.outcome.steps);
            if let Some(c) = r.outcome.certification {
                println!("certification: {c:?} (spectral tail {:.3e})", r.outcome.spectral_tail);
            }
        }
        Command::Sweep { common, lambdas } => {
            let cfg = common.load()?;
            configure_threads(&cfg);
            println!("{}", experiment::commands::SWEEP_HEADER);
            for r in experiment::cmd_sweep(&cfg, &lambdas)? {
                println!("{},{},{},{},{},{}", r.lambda, r.s_omega, r.virial, r.virial_sign, r.below_ground_action, r.in_unstable_set);
            }
        }
        Command::Validate { common, checks } => {
            let cfg = common.load()?;
            configure_threads(&cfg);
            let selection: Option<Vec<String>> = checks.map(|s| {
                s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
            });
            let report = experiment::cmd_validate(&cfg, selection.as_deref())?;
            for (name, c) in &report.checks {
                println!("{name}: {:?} measured {:.3e} tolerance {:.1e}", c.status, c.measured, c.tolerance);
            }
            if !report.passed {
                return Err(Error::Validation(report.failures().join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
