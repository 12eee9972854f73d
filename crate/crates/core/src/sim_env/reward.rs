use super::types::StepOutcome;

/// Weights of the shared step reward
/// `R = alpha * throughput - beta * mean_latency_ms - gamma * dropped - delta * detections`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub alpha: f64,
    /// Per millisecond of mean latency.
    pub beta: f64,
    /// Per dropped packet.
    pub gamma: f64,
    /// Per agent flagged for adversarial exposure.
    pub delta: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
            gamma: 0.5,
            delta: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            delta: 0.0,
        }
    }
}

pub fn compute_reward(outcome: &StepOutcome, weights: &RewardWeights) -> f64 {
    let throughput = outcome.delivered as f64 / outcome.step_seconds;
    let detections = outcome.adversarial_detected.iter().filter(|&&d| d).count() as f64;
    weights.alpha * throughput
        - weights.beta * outcome.mean_latency_ms()
        - weights.gamma * outcome.dropped as f64
        - weights.delta * detections
}
