//! Seeded experiment execution, metrics and output files.

pub mod config;
pub mod metrics;
pub mod streams;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::{AgentError, AgentState, Baseline, EpisodeLog, EpisodeOptions, Phase};
use crate::env::sample_box_pose;

pub use config::{Budget, ConfigError, EvalConfig, ExperimentConfig};
pub use metrics::{CurveRow, MetricsRow, CURVES_HEADER, METRICS_HEADER};
use streams::{eval_rngs, stream_rng, training_rngs, Stream};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub metrics: MetricsRow,
    pub curves: Vec<CurveRow>,
    /// Training episodes followed by evaluation trials.
    pub episodes: Vec<EpisodeLog>,
    /// Agent after training, as used for evaluation.
    pub agent: AgentState,
}

impl RunOutput {
    pub fn training(&self) -> impl Iterator<Item = &EpisodeLog> {
        self.episodes.iter().filter(|l| l.phase == Phase::Train)
    }

    pub fn evaluation(&self) -> impl Iterator<Item = &EpisodeLog> {
        self.episodes.iter().filter(|l| l.phase == Phase::Eval)
    }
}

/// Trains for the configured budget, then evaluates the frozen agent.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    run_with_progress(config, |_| {})
}

/// As [`run_experiment`], calling `progress` after every episode.
pub fn run_with_progress(config: &ExperimentConfig, mut progress: impl FnMut(&EpisodeLog)) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let seed = config.seed;
    let box_pose = sample_box_pose(&config.env, &mut stream_rng(seed, Stream::Layout, 0));
    let mut agent = AgentState::new(config.baseline, config.agent_config(), &mut stream_rng(seed, Stream::PolicyInit, 0))?;
    let mut episodes = Vec::new();
    let mut curves = Vec::new();

    let per = config.budget.episodes_per_iteration;
    for iteration in 0..config.budget.iterations {
        for episode in 0..per {
            let index = (iteration * per + episode) as u64;
            let log = agent.run_episode(box_pose, &mut training_rngs(seed, index), EpisodeOptions::TRAIN, Phase::Train, iteration, episode);
            curves.push(CurveRow {
                iteration,
                episode,
                success: log.success,
                steps: log.steps,
            });
            progress(&log);
            episodes.push(log);
        }
    }

    let opts = EpisodeOptions {
        learn: false,
        deterministic: config.eval.deterministic,
    };
    let eval_seed = config.eval_seed();
    for trial in 0..config.eval.trials {
        let log = agent.run_episode(box_pose, &mut eval_rngs(eval_seed, trial as u64), opts, Phase::Eval, 0, trial);
        progress(&log);
        episodes.push(log);
    }

    let eval: Vec<&EpisodeLog> = episodes.iter().filter(|l| l.phase == Phase::Eval).collect();
    let metrics = MetricsRow::from_logs(config.baseline, seed, &eval);
    Ok(RunOutput {
        config: config.clone(),
        metrics,
        curves,
        episodes,
        agent,
    })
}

/// Writes `path` through a sibling temporary file and a rename.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
    let tmp = path.with_extension("partial");
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    fill(&mut w)?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, |w| {
        metrics::write_csv(rows, &METRICS_HEADER, w).map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn write_curves(rows: &[CurveRow], path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, |w| {
        metrics::write_csv(rows, &CURVES_HEADER, w).map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn write_episodes(logs: &[EpisodeLog], path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, |w| {
        for (i, log) in logs.iter().enumerate() {
            serde_json::to_writer(&mut *w, log).map_err(|source| HarnessError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?;
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        Ok(())
    })
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeLog>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    metrics::read_metrics(file).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    metrics::read_curves(file).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// `metrics.csv`, `curves.csv`, `episodes.jsonl` and `config.resolved.toml`
/// under `dir`.
pub fn emit_outputs(run: &RunOutput, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_metrics(std::slice::from_ref(&run.metrics), &dir.join("metrics.csv"))?;
    write_curves(&run.curves, &dir.join("curves.csv"))?;
    write_episodes(&run.episodes, &dir.join("episodes.jsonl"))?;
    let resolved = dir.join("config.resolved.toml");
    write_atomic(&resolved, |w| w.write_all(run.config.to_toml().as_bytes()).map_err(io_err(&resolved)))
}

/// Metrics per baseline from the evaluation episodes of a log file, in
/// first-seen order.
pub fn recompute_metrics(logs: &[EpisodeLog], seed: u64) -> Vec<MetricsRow> {
    let mut order: Vec<Baseline> = Vec::new();
    for l in logs {
        if !order.contains(&l.baseline) {
            order.push(l.baseline);
        }
    }
    order
        .into_iter()
        .map(|b| {
            let eval: Vec<&EpisodeLog> = logs.iter().filter(|l| l.baseline == b && l.phase == Phase::Eval).collect();
            MetricsRow::from_logs(b, seed, &eval)
        })
        .collect()
}

/// Runs every baseline with the same seed, one worker per core, writing each
/// cell under `dir/<baseline>/` and the merged table to `dir/metrics.csv`.
pub fn sweep(base: &ExperimentConfig, baselines: &[Baseline], dir: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(baselines.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<MetricsRow, HarnessError>>> = (0..baselines.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&b) = baselines.get(i) else { break };
                let cfg = ExperimentConfig {
                    baseline: b,
                    ..base.clone()
                };
                let r = run_experiment(&cfg).and_then(|run| {
                    emit_outputs(&run, &dir.join(b.name()))?;
                    Ok(run.metrics)
                });
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let rows = results
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_metrics(&rows, &dir.join("metrics.csv"))?;
    Ok(rows)
}
