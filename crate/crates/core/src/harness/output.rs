//! CSV rendering. Numbers are written in positional decimal notation with
//! 17 significant digits so that reruns can be compared byte for byte.

use std::fmt::Write;

use super::{MetricsRecord, RunSummary};
use crate::federation::RoundReport;

const METRICS_HEADER: &str = "seed,episode,mean_reward,mean_latency_ms,throughput_per_s,loss_rate,per_agent_delivered_variance,round_rejections";
pub const SUMMARY_HEADER: &str =
    "seed,convergence_episode,final_window_reward,final_latency_ms,final_throughput,diverged";
const ROUNDS_HEADER: &str = "seed,round,role,agent_id,score,accepted,reason";

pub fn metrics_header() -> &'static str {
    METRICS_HEADER
}

/// `x` with 17 significant digits and no exponent.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.16}", 0.0);
    }
    // The exponent of the rounded value, read back from scientific notation.
    let sci = format!("{:.16e}", x);
    let exp: i32 = sci[sci.find('e').expect("scientific form") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (16 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

pub(crate) fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.seed,
            r.episode,
            format_number(r.mean_reward),
            format_number(r.mean_latency_ms),
            format_number(r.throughput_per_s),
            format_number(r.loss_rate),
            format_number(r.per_agent_delivered_variance),
            r.round_rejections
        )
        .expect("write to String");
    }
    out
}

pub(crate) fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.seed,
            s.convergence_episode.map(|e| e.to_string()).unwrap_or_default(),
            format_number(s.final_window_reward),
            format_number(s.final_latency_ms),
            format_number(s.final_throughput),
            s.diverged
        )
        .expect("write to String");
    }
    out
}

pub(crate) fn rounds_csv(seed: u64, rounds: &[RoundReport]) -> String {
    let mut out = String::from(ROUNDS_HEADER);
    out.push('\n');
    for report in rounds {
        for role in &report.roles {
            for v in &role.verdicts {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    seed,
                    report.round,
                    role.role,
                    v.agent_id,
                    format_number(v.score),
                    v.accepted,
                    v.reason
                )
                .expect("write to String");
            }
        }
    }
    out
}
