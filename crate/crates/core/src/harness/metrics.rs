use serde::{Deserialize, Serialize};

use crate::drl::{summarize, EpisodeMetrics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub v2i_sum_rate_mbps: f64,
    pub v2v_fail_prob: f64,
    pub mean_reward: f64,
    pub episodes: u64,
}

/// Means over seeds and episodes with 95% half-widths over the seed means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub v2i_sum_rate_mbps: f64,
    pub v2i_half_width: f64,
    pub v2v_fail_prob: f64,
    pub v2v_fail_half_width: f64,
    pub mean_reward: f64,
    pub episodes: u64,
    pub per_seed: Vec<SeedMetrics>,
}

/// `1.96 * s / sqrt(n)` with the sample standard deviation; zero for a
/// single value.
pub fn half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

pub fn seed_metrics(seed: u64, episodes: &[EpisodeMetrics]) -> SeedMetrics {
    let (v2i, fail, reward) = summarize(episodes);
    SeedMetrics {
        seed,
        v2i_sum_rate_mbps: v2i,
        v2v_fail_prob: fail,
        mean_reward: reward,
        episodes: episodes.len() as u64,
    }
}

pub fn aggregate_metrics(logs: &[(u64, Vec<EpisodeMetrics>)]) -> MetricsRecord {
    let per_seed: Vec<SeedMetrics> = logs.iter().map(|(s, eps)| seed_metrics(*s, eps)).collect();
    let all: Vec<EpisodeMetrics> = logs.iter().flat_map(|(_, eps)| eps.iter().copied()).collect();
    let (v2i, fail, reward) = summarize(&all);
    let col = |f: fn(&SeedMetrics) -> f64| per_seed.iter().map(f).collect::<Vec<_>>();
    MetricsRecord {
        v2i_sum_rate_mbps: v2i,
        v2i_half_width: half_width(&col(|m| m.v2i_sum_rate_mbps)),
        v2v_fail_prob: fail,
        v2v_fail_half_width: half_width(&col(|m| m.v2v_fail_prob)),
        mean_reward: reward,
        episodes: all.len() as u64,
        per_seed,
    }
}
