use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::agent::{Baseline, EpisodeLog};

/// One row of `metrics.csv`, computed from evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub baseline: Baseline,
    pub success_rate_pct: f64,
    /// Mean steps over successful trials only; empty without successes.
    pub avg_steps_success: Option<f64>,
    #[serde(rename = "pct_in_Su")]
    pub pct_in_su: f64,
    #[serde(rename = "pct_in_Shat_u")]
    pub pct_in_shat_u: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn from_logs(baseline: Baseline, seed: u64, logs: &[&EpisodeLog]) -> Self {
        let n = logs.len();
        let pct = |count: usize| if n == 0 { 0.0 } else { 100.0 * count as f64 / n as f64 };
        let steps: Vec<usize> = logs.iter().filter_map(|l| l.steps_to_success).collect();
        let avg = if steps.is_empty() {
            None
        } else {
            Some(steps.iter().sum::<usize>() as f64 / steps.len() as f64)
        };
        Self {
            baseline,
            success_rate_pct: pct(steps.len()),
            avg_steps_success: avg,
            pct_in_su: pct(logs.iter().filter(|l| l.entered_su()).count()),
            pct_in_shat_u: pct(logs.iter().filter(|l| l.entered_shat()).count()),
            seed,
        }
    }

    pub fn successes(&self, trials: usize) -> usize {
        (self.success_rate_pct * trials as f64 / 100.0).round() as usize
    }
}

/// One training episode of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub episode: usize,
    pub success: bool,
    pub steps: usize,
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], headers: &[&str], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(headers)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const METRICS_HEADER: [&str; 6] = ["baseline", "success_rate_pct", "avg_steps_success", "pct_in_Su", "pct_in_Shat_u", "seed"];
pub const CURVES_HEADER: [&str; 4] = ["iteration", "episode", "success", "steps"];

pub fn read_metrics<R: Read>(input: R) -> csv::Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_curves<R: Read>(input: R) -> csv::Result<Vec<CurveRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
