use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use guapo::agent::{Baseline, EpisodeLog, Phase};
use guapo::harness::{self, ConfigError, ExperimentConfig, HarnessError, MetricsRow};
use guapo::verify;

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "guapo", version, about = "Peg insertion under pose uncertainty: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one baseline.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        baseline: Option<Baseline>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run several baselines with the same seed and merge their metrics.
    Sweep {
        /// Comma-separated baseline names, or `all`.
        #[arg(long, default_value = "all")]
        baselines: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the oracle and property checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute metrics from an episode log.
    Replay {
        #[arg(long)]
        episodes: PathBuf,
        /// Seed written to the seed column.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(anyhow::Error),
    Verify,
    Other(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.into()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut c = ExperimentConfig::default();
            c.apply_env_seed(std::env::var(harness::config::SEED_ENV).ok().as_deref())?;
            c
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_baselines(list: &str) -> Result<Vec<Baseline>, Failure> {
    if list.trim() == "all" {
        return Ok(Baseline::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.trim().parse::<Baseline>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(e.into()))
}

fn print_row(r: &MetricsRow) {
    let steps = r.avg_steps_success.map_or("n/a".to_string(), |s| format!("{s:.1}"));
    println!(
        "{:<16} success {:>6.2}%  steps {:>7}  in S_u {:>6.2}%  in Shat_u {:>6.2}%",
        r.baseline.name(),
        r.success_rate_pct,
        steps,
        r.pct_in_su,
        r.pct_in_shat_u
    );
}

fn progress(log: &EpisodeLog) {
    let phase = match log.phase {
        Phase::Train => format!("train {:>3}.{}", log.iteration, log.episode),
        Phase::Eval => format!("eval  {:>5}", log.episode),
    };
    eprintln!("{} {phase} {:?} steps {}", log.baseline, log.status, log.steps);
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            baseline,
            seed,
            out,
        } => {
            let mut cfg = load_config(Some(&config), seed)?;
            if let Some(b) = baseline {
                cfg.baseline = b;
            }
            cfg.validate()?;
            let result = harness::run_with_progress(&cfg, progress)?;
            harness::emit_outputs(&result, &out)?;
            print_row(&result.metrics);
        }
        Command::Sweep {
            baselines,
            config,
            seed,
            out,
        } => {
            let cfg = load_config(config.as_ref(), seed)?;
            cfg.validate()?;
            let list = parse_baselines(&baselines)?;
            for r in harness::sweep(&cfg, &list, &out)? {
                print_row(&r);
            }
        }
        Command::Verify { seed } => {
            let checks = verify::run_all(seed);
            for c in &checks {
                println!("{}", c.line());
            }
            if checks.iter().any(|c| !c.passed) {
                return Err(Failure::Verify);
            }
        }
        Command::Replay { episodes, seed } => {
            let logs = harness::read_episodes(&episodes)?;
            let rows = harness::recompute_metrics(&logs, seed);
            let mut out = std::io::stdout().lock();
            harness::metrics::write_csv(&rows, &harness::METRICS_HEADER, &mut out)
                .context("writing metrics to stdout")
                .map_err(Failure::Other)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
