//! Per-agent observation, reward and stepping on top of [`Environment`].

use serde::{Deserialize, Serialize};

use crate::channel_env::{DeliveryEvent, Decision, Environment, LinkRates, PayloadTracker};
use crate::error::Result;

/// Gains in dB map to [0, 1] through `(x + GAIN_DB_OFFSET) / DB_SPAN`.
pub const GAIN_DB_OFFSET: f64 = 120.0;
/// Interference powers in dBm map through `(x + POWER_DBM_OFFSET) / DB_SPAN`.
pub const POWER_DBM_OFFSET: f64 = 114.0;
pub const DB_SPAN: f64 = 60.0;

pub fn normalize_gain_db(db: f64) -> f64 {
    clamp01((db + GAIN_DB_OFFSET) / DB_SPAN)
}

pub fn normalize_power_dbm(dbm: f64) -> f64 {
    clamp01((dbm + POWER_DBM_OFFSET) / DB_SPAN)
}

fn clamp01(x: f64) -> f64 {
    // NaN never arises from finite gains; -inf (zero linear) clamps to 0.
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Length of the observation vector for `m` sub-bands.
pub fn observation_len(m: usize) -> usize {
    6 * m + 2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub v2i: f64,
    pub v2v: f64,
    pub time_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            v2i: 0.1,
            v2v: 0.9,
            time_penalty: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub subband_count: usize,
    pub power_range: [f64; 2],
}

impl ActionDescriptor {
    pub fn for_env(env: &Environment) -> Self {
        ActionDescriptor {
            subband_count: env.num_v2i(),
            power_range: [0.0, env.config().v2v_max_power_w()],
        }
    }

    pub fn dimension(&self) -> usize {
        self.subband_count + 1
    }
}

/// What each agent saw in the previous slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    num_v2i: usize,
    /// `None` at the start of an episode.
    pub interference_w: Option<Vec<f64>>,
    /// Sub-band used by each transmitting V2V link.
    pub selections: Vec<Option<usize>>,
}

impl SlotRecord {
    pub fn empty(num_v2v: usize, num_v2i: usize) -> Self {
        SlotRecord {
            num_v2i,
            interference_w: None,
            selections: vec![None; num_v2v],
        }
    }
}

pub fn observe(env: &Environment, k: usize, prev: &SlotRecord) -> Observation {
    let m_n = env.num_v2i();
    let k_n = env.num_v2v();
    let g = env.gains();
    let to_db = |x: f64| 10.0 * x.log10();
    let mut obs = Vec::with_capacity(observation_len(m_n));
    obs.extend((0..m_n).map(|m| normalize_gain_db(to_db(g.g_kk(k, m)))));
    obs.extend((0..m_n).map(|m| normalize_gain_db(to_db(g.h_mk(m, k)))));
    obs.extend((0..m_n).map(|m| {
        let agg: f64 = (0..k_n).filter(|&j| j != k).map(|j| g.g_jk(j, k, m)).sum();
        normalize_gain_db(to_db(agg))
    }));
    obs.extend((0..m_n).map(|m| normalize_gain_db(to_db(g.g_kb(k, m)))));
    match &prev.interference_w {
        Some(i) => obs.extend((0..m_n).map(|m| normalize_power_dbm(to_db(i[k * prev.num_v2i + m]) + 30.0))),
        None => obs.extend(std::iter::repeat_n(0.0, m_n)),
    }
    let others = (k_n - 1) as f64;
    obs.extend((0..m_n).map(|m| {
        if k_n == 1 {
            return 0.0;
        }
        let count = prev
            .selections
            .iter()
            .enumerate()
            .filter(|&(j, s)| j != k && *s == Some(m))
            .count();
        count as f64 / others
    }));
    let tracker = env.payloads();
    obs.push(tracker.remaining_load_frac(k));
    obs.push(tracker.remaining_time_frac(k));
    Observation(obs)
}

/// Immediate reward of agent `k` for a slot with `rates`, given the payload
/// state at the start of that slot.
///
/// Rates enter as spectral efficiency (bit/s/Hz). A V2V link that already
/// delivered its payload this window contributes the efficiency it had in
/// its delivery slot. The time penalty is the elapsed fraction of the
/// agent's latency window.
pub fn reward(rates: &LinkRates, tracker: &PayloadTracker, weights: &RewardWeights, k: usize, bandwidth_hz: f64) -> f64 {
    let v2i_se: f64 = rates.v2i_rate.iter().map(|r| r / bandwidth_hz).sum();
    let v2v_se: f64 = rates
        .v2v_rate
        .iter()
        .zip(&tracker.links)
        .map(|(r, l)| match (l.idle, l.delivered_se) {
            (true, Some(se)) => se,
            _ => r / bandwidth_hz,
        })
        .sum();
    let elapsed = 1.0 - tracker.remaining_time_frac(k);
    weights.v2i * v2i_se + weights.v2v * v2v_se - weights.time_penalty * elapsed
}

/// Σ_i γ^i r_i.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// One slot of the multi-agent MDP.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub next_observations: Vec<Observation>,
    pub rates: LinkRates,
    pub events: Vec<DeliveryEvent>,
}

/// Environment plus the one-slot memory needed for observations.
#[derive(Clone, Debug)]
pub struct V2xMdp {
    pub env: Environment,
    pub weights: RewardWeights,
    prev: SlotRecord,
}

impl V2xMdp {
    pub fn new(env: Environment, weights: RewardWeights) -> Self {
        let prev = SlotRecord::empty(env.num_v2v(), env.num_v2i());
        V2xMdp { env, weights, prev }
    }

    /// Forgets the previous-slot interference and selections.
    pub fn begin_episode(&mut self) {
        self.prev = SlotRecord::empty(self.env.num_v2v(), self.env.num_v2i());
    }

    pub fn observe(&self, k: usize) -> Observation {
        observe(&self.env, k, &self.prev)
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.env.num_v2v()).map(|k| self.observe(k)).collect()
    }

    pub fn num_agents(&self) -> usize {
        self.env.num_v2v()
    }

    pub fn step(&mut self, decision: &Decision) -> Result<StepOutcome> {
        let eval = self.env.evaluate(decision)?;
        let bandwidth = self.env.config().subband_bandwidth_hz;
        let k_n = self.env.num_v2v();
        let rewards = (0..k_n)
            .map(|k| reward(&eval.rates, self.env.payloads(), &self.weights, k, bandwidth))
            .collect();
        let selections = (0..k_n)
            .map(|k| self.env.payloads().is_active(k).then_some(eval.applied.subband[k]))
            .collect();
        let events = self.env.commit(&eval);
        self.prev = SlotRecord {
            num_v2i: self.env.num_v2i(),
            interference_w: Some(eval.interference_w),
            selections,
        };
        Ok(StepOutcome {
            rewards,
            next_observations: self.observe_all(),
            rates: eval.rates,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_env::{Redelivery, ScenarioConfig, ScenarioKind};
    use proptest::prelude::*;

    fn tracker(remaining_slots: u32) -> PayloadTracker {
        let mut t = PayloadTracker::new(1, 8480.0, 100, 1e-3, Redelivery::NextWindow);
        t.links[0].remaining_slots = remaining_slots;
        t
    }

    fn rates(v2i_se: &[f64], v2v_se: &[f64]) -> LinkRates {
        LinkRates {
            v2i_rate: v2i_se.iter().map(|x| x * 1e6).collect(),
            v2v_rate: v2v_se.iter().map(|x| x * 1e6).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_rates_at_window_start() {
        let r = reward(&rates(&[0.0], &[0.0]), &tracker(100), &RewardWeights::default(), 0, 1e6);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reward_by_hand() {
        let r = reward(&rates(&[2.0], &[3.0]), &tracker(50), &RewardWeights::default(), 0, 1e6);
        assert!((r - 2.4).abs() < 1e-12);
    }

    #[test]
    fn doubling_v2v_weight_doubles_v2v_term_only() {
        let t = tracker(50);
        let x = rates(&[2.0], &[3.0]);
        let w = RewardWeights::default();
        let w2 = RewardWeights { v2v: 2.0 * w.v2v, ..w };
        let d = reward(&x, &t, &w2, 0, 1e6) - reward(&x, &t, &w, 0, 1e6);
        assert!((d - 0.9 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn delivered_link_contributes_bonus() {
        let mut t = tracker(50);
        t.links[0].idle = true;
        t.links[0].delivered_se = Some(4.0);
        let w = RewardWeights {
            v2i: 0.0,
            v2v: 1.0,
            time_penalty: 0.0,
        };
        assert_eq!(reward(&rates(&[1.0], &[0.0]), &t, &w, 0, 1e6), 4.0);
    }

    #[test]
    fn discounted_returns() {
        assert_eq!(discounted_return(&[3.0, 5.0, 7.0], 0.0), 3.0);
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
        assert_eq!(discounted_return(&[1.0, 2.0, 3.5], 1.0), 6.5);
    }

    #[test]
    fn normalization_endpoints() {
        assert_eq!(normalize_gain_db(-120.0), 0.0);
        assert_eq!(normalize_gain_db(-60.0), 1.0);
        assert_eq!(normalize_gain_db(-200.0), 0.0);
        assert_eq!(normalize_gain_db(10.0), 1.0);
        assert_eq!(normalize_gain_db(f64::NEG_INFINITY), 0.0);
        assert_eq!(normalize_power_dbm(-114.0), 0.0);
        assert_eq!(normalize_power_dbm(-54.0), 1.0);
    }

    #[test]
    fn episode_start_observation() {
        let env = Environment::build(&ScenarioConfig::preset(ScenarioKind::Urban, 4, 4), 1).unwrap();
        let mdp = V2xMdp::new(env, RewardWeights::default());
        let o = mdp.observe(2);
        assert_eq!(o.len(), 26);
        assert!(o.0[16..24].iter().all(|&x| x == 0.0));
        assert_eq!(o.0[24], 1.0);
        assert_eq!(o.0[25], 1.0);
    }

    #[test]
    fn single_agent_has_floor_interferer_block() {
        let env = Environment::build(&ScenarioConfig::preset(ScenarioKind::Highway, 3, 1), 1).unwrap();
        let o = observe(&env, 0, &SlotRecord::empty(1, 3));
        assert!(o.0[6..9].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn step_updates_neighbor_counts() {
        let env = Environment::build(&ScenarioConfig::preset(ScenarioKind::Urban, 2, 3), 5).unwrap();
        let mut mdp = V2xMdp::new(env, RewardWeights::default());
        let d = Decision {
            subband: vec![1, 1, 0],
            power_w: vec![0.1, 0.1, 0.1],
        };
        let out = mdp.step(&d).unwrap();
        let o = &out.next_observations[2];
        // Agent 2 sees both other links on sub-band 1.
        assert_eq!(&o.0[10..12], &[0.0, 1.0]);
        let o0 = &out.next_observations[0];
        assert_eq!(&o0.0[10..12], &[0.5, 0.5]);
        assert!(o0.0[8..10].iter().all(|&x| x > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn observation_length_and_range(m in 1usize..=8, k in 1usize..=4, seed in 0u64..1000) {
            let env = Environment::build(&ScenarioConfig::preset(ScenarioKind::Urban, m, k), seed).unwrap();
            let mut mdp = V2xMdp::new(env, RewardWeights::default());
            let d = Decision { subband: (0..k).map(|i| i % m).collect(), power_w: vec![0.05; k] };
            let out = mdp.step(&d).unwrap();
            for o in out.next_observations {
                prop_assert_eq!(o.len(), 6 * m + 2);
                prop_assert!(o.0.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
            }
        }

        #[test]
        fn reward_scales_with_weights(c in 0.01f64..100.0, se1 in 0.0f64..10.0, se2 in 0.0f64..10.0, u in 0u32..=100) {
            let x = rates(&[se1], &[se2]);
            let t = tracker(u);
            let w = RewardWeights::default();
            let wc = RewardWeights { v2i: c * w.v2i, v2v: c * w.v2v, time_penalty: c * w.time_penalty };
            let a = reward(&x, &t, &w, 0, 1e6);
            let b = reward(&x, &t, &wc, 0, 1e6);
            prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
