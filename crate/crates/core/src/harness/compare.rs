//! Multi-variant comparison table.

use std::fmt::Write;

use super::output::format_number;
use super::{run_experiment, ExperimentConfig, RunSummary, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub seeds: usize,
    pub reward: (f64, f64),
    pub latency_ms: (f64, f64),
    pub throughput: (f64, f64),
    /// Over converged seeds only; NaN when none converged.
    pub convergence: (f64, f64),
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ComparisonReport {
    pub fn from_summaries(results: &[(Variant, Vec<RunSummary>)]) -> Self {
        let rows = results
            .iter()
            .map(|(variant, summaries)| {
                let ok: Vec<&RunSummary> = summaries.iter().filter(|s| !s.diverged).collect();
                let col = |f: fn(&RunSummary) -> f64| ok.iter().map(|s| f(s)).collect::<Vec<_>>();
                let conv: Vec<f64> = ok
                    .iter()
                    .filter_map(|s| s.convergence_episode.map(|e| e as f64))
                    .collect();
                ComparisonRow {
                    variant: *variant,
                    seeds: summaries.len(),
                    reward: mean_sd(&col(|s| s.final_window_reward)),
                    latency_ms: mean_sd(&col(|s| s.final_latency_ms)),
                    throughput: mean_sd(&col(|s| s.final_throughput)),
                    convergence: mean_sd(&conv),
                    converged: conv.len(),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "variant,seeds,reward_mean,reward_sd,latency_ms_mean,latency_ms_sd,throughput_mean,throughput_sd,convergence_mean,convergence_sd,converged\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.variant,
                r.seeds,
                format_number(r.reward.0),
                format_number(r.reward.1),
                format_number(r.latency_ms.0),
                format_number(r.latency_ms.1),
                format_number(r.throughput.0),
                format_number(r.throughput.1),
                format_number(r.convergence.0),
                format_number(r.convergence.1),
                r.converged
            )
            .expect("write to String");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>5} {:>20} {:>20} {:>20} {:>16} {:>9}\n",
            "variant", "seeds", "reward", "latency_ms", "throughput/s", "convergence", "converged"
        );
        let pm = |(m, s): (f64, f64), digits: usize| format!("{m:.digits$} ± {s:.digits$}");
        for r in &self.rows {
            writeln!(
                out,
                "{:<12} {:>5} {:>20} {:>20} {:>20} {:>16} {:>9}",
                r.variant.name(),
                r.seeds,
                pm(r.reward, 3),
                pm(r.latency_ms, 2),
                pm(r.throughput, 2),
                pm(r.convergence, 1),
                format!("{}/{}", r.converged, r.seeds)
            )
            .expect("write to String");
        }
        out
    }
}

/// Runs each config and tabulates the results. The configs must agree on
/// everything except the variant; the report is written to
/// `comparison.csv` and `comparison.txt` in the shared output directory.
pub fn compare_variants(configs: &[ExperimentConfig]) -> Result<ComparisonReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::config("run.variant", "no variants to compare"))?;
    for c in configs {
        if c.with_variant(first.run.variant) != *first {
            return Err(Error::config(
                "run.variant",
                format!("config for {} differs from {} beyond the variant", c.run.variant, first.run.variant),
            ));
        }
    }
    let mut results = Vec::with_capacity(configs.len());
    for c in configs {
        results.push((c.run.variant, run_experiment(c)?));
    }
    let report = ComparisonReport::from_summaries(&results);
    let dir = &first.run.output_dir;
    for (name, body) in [("comparison.csv", report.to_csv()), ("comparison.txt", report.to_table())] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}
