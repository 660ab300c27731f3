use serde::{Deserialize, Serialize};

use super::gains::{draw_large_scale, draw_small_scale, ChannelGains, Placement};
use super::layout::{distance, layout_for, RoadLayout, VehicleState};
use super::payload::{DeliveryEvent, PayloadTracker, Redelivery};
use super::scenario::ScenarioConfig;
use super::sinr::{compute_rates, compute_sinr, v2v_interference, Decision, LinkRates};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

const PAIRING_ATTEMPTS: usize = 2000;
const MIN_PAIR_DISTANCE_M: f64 = 3.0;

/// The simulated world: vehicles, channel gains and payload state.
#[derive(Clone, Debug)]
pub struct Environment {
    cfg: ScenarioConfig,
    layout: RoadLayout,
    seed: u64,
    v2i: Vec<VehicleState>,
    v2v_tx: Vec<VehicleState>,
    v2v_rx: Vec<VehicleState>,
    gains: ChannelGains,
    payloads: PayloadTracker,
    slot: u64,
    layout_rng: Rng,
    mobility_rng: Rng,
    shadow_rng: Rng,
    fading_rng: Rng,
}

/// Result of applying a joint decision to the current channel, before any
/// state is advanced.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotEvaluation {
    /// The decision as applied: links that are idle transmit at zero power.
    pub applied: Decision,
    pub rates: LinkRates,
    /// Interference power at each V2V receiver per sub-band, `[k * M + m]`.
    pub interference_w: Vec<f64>,
}

/// Serializable dump of the world state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub slot: u64,
    pub v2i: Vec<VehicleState>,
    pub v2v_tx: Vec<VehicleState>,
    pub v2v_rx: Vec<VehicleState>,
    pub gains: ChannelGains,
    pub payloads: PayloadTracker,
}

impl Environment {
    pub fn build(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        Self::build_with(cfg, seed, Redelivery::NextWindow)
    }

    pub fn build_with(cfg: &ScenarioConfig, seed: u64, redelivery: Redelivery) -> Result<Self> {
        cfg.validate()?;
        let layout = layout_for(cfg);
        let payloads = PayloadTracker::new(
            cfg.num_v2v,
            cfg.payload_bits(),
            cfg.window_slots(),
            cfg.slot_duration_s,
            redelivery,
        );
        let mut env = Environment {
            cfg: cfg.clone(),
            layout,
            seed,
            v2i: Vec::new(),
            v2v_tx: Vec::new(),
            v2v_rx: Vec::new(),
            gains: ChannelGains::unit(cfg.num_v2i, cfg.num_v2v),
            payloads,
            slot: 0,
            layout_rng: rng::stream(seed, rng::tag::LAYOUT),
            mobility_rng: rng::stream(seed, rng::tag::MOBILITY),
            shadow_rng: rng::stream(seed, rng::tag::SHADOWING),
            fading_rng: rng::stream(seed, rng::tag::FADING),
        };
        env.relayout()?;
        Ok(env)
    }

    /// Places all vehicles anew, refreshes both fading scales and restarts
    /// payload accounting at slot 0.
    pub fn relayout(&mut self) -> Result<()> {
        let speed = self.cfg.speed_mps();
        let rng = &mut self.layout_rng;
        self.v2i = (0..self.cfg.num_v2i)
            .map(|_| self.layout.random_vehicle(speed, rng))
            .collect();
        self.v2v_tx.clear();
        self.v2v_rx.clear();
        for pair in 0..self.cfg.num_v2v {
            let tx = self.layout.random_vehicle(speed, rng);
            let mut rx = None;
            for _ in 0..PAIRING_ATTEMPTS {
                let cand = self.layout.random_vehicle(speed, rng);
                let d = distance(tx.position, cand.position);
                if (MIN_PAIR_DISTANCE_M..=self.cfg.pairing_radius_m).contains(&d) {
                    rx = Some(cand);
                    break;
                }
            }
            let rx = rx.ok_or(Error::PairingFailed {
                pair,
                radius_m: self.cfg.pairing_radius_m,
                attempts: PAIRING_ATTEMPTS,
            })?;
            self.v2v_tx.push(tx);
            self.v2v_rx.push(rx);
        }
        self.slot = 0;
        self.payloads.reset(0);
        self.update_large_scale();
        self.update_small_scale();
        Ok(())
    }

    pub fn step_mobility(&mut self, dt_s: f64) {
        let p = self.cfg.turn_probability;
        for v in self.v2i.iter_mut().chain(&mut self.v2v_tx).chain(&mut self.v2v_rx) {
            self.layout.advance(v, dt_s, p, &mut self.mobility_rng);
        }
    }

    pub fn update_large_scale(&mut self) {
        let placement = Placement {
            layout: &self.layout,
            v2i: &self.v2i,
            v2v_tx: &self.v2v_tx,
            v2v_rx: &self.v2v_rx,
        };
        self.gains.large_scale = draw_large_scale(&self.cfg, &placement, &mut self.shadow_rng);
    }

    pub fn update_small_scale(&mut self) {
        draw_small_scale(&mut self.gains.small_scale, &mut self.fading_rng);
    }

    /// Rates and interference produced by `decision` on the current channel.
    pub fn evaluate(&self, decision: &Decision) -> Result<SlotEvaluation> {
        decision.validate(self.cfg.num_v2i, self.cfg.num_v2v, self.cfg.v2v_max_power_w())?;
        let mut applied = decision.clone();
        for (k, p) in applied.power_w.iter_mut().enumerate() {
            if !self.payloads.is_active(k) {
                *p = 0.0;
            }
        }
        let p_v2i = self.cfg.v2i_tx_power_w();
        let sinr = compute_sinr(&self.gains, &applied, p_v2i, self.cfg.noise_power_w());
        let rates = compute_rates(sinr, self.cfg.subband_bandwidth_hz);
        let interference_w = v2v_interference(&self.gains, &applied, p_v2i);
        Ok(SlotEvaluation {
            applied,
            rates,
            interference_w,
        })
    }

    /// Books the slot's deliveries and moves the world to the next slot:
    /// small-scale fading is redrawn every slot, mobility and large-scale
    /// fading once per latency window.
    pub fn commit(&mut self, eval: &SlotEvaluation) -> Vec<DeliveryEvent> {
        let w = self.cfg.subband_bandwidth_hz;
        let se: Vec<f64> = eval.rates.v2v_rate.iter().map(|r| r / w).collect();
        let events = self.payloads.advance(&eval.rates.v2v_rate, &se, self.slot);
        self.slot += 1;
        let window = self.cfg.window_slots() as u64;
        if self.slot % window == 0 {
            self.step_mobility(window as f64 * self.cfg.slot_duration_s);
            self.update_large_scale();
        }
        self.update_small_scale();
        events
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &RoadLayout {
        &self.layout
    }

    pub fn gains(&self) -> &ChannelGains {
        &self.gains
    }

    pub fn gains_mut(&mut self) -> &mut ChannelGains {
        &mut self.gains
    }

    pub fn payloads(&self) -> &PayloadTracker {
        &self.payloads
    }

    pub fn payloads_mut(&mut self) -> &mut PayloadTracker {
        &mut self.payloads
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_v2i(&self) -> usize {
        self.cfg.num_v2i
    }

    pub fn num_v2v(&self) -> usize {
        self.cfg.num_v2v
    }

    pub fn vehicles(&self) -> (&[VehicleState], &[VehicleState], &[VehicleState]) {
        (&self.v2i, &self.v2v_tx, &self.v2v_rx)
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            config: self.cfg.clone(),
            seed: self.seed,
            slot: self.slot,
            v2i: self.v2i.clone(),
            v2v_tx: self.v2v_tx.clone(),
            v2v_rx: self.v2v_rx.clone(),
            gains: self.gains.clone(),
            payloads: self.payloads.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }
}
