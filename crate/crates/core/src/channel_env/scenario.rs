use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Urban,
    Highway,
    Rural,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Urban, ScenarioKind::Highway, ScenarioKind::Rural];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Urban => "urban",
            ScenarioKind::Highway => "highway",
            ScenarioKind::Rural => "rural",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "urban" => Ok(ScenarioKind::Urban),
            "highway" => Ok(ScenarioKind::Highway),
            "rural" => Ok(ScenarioKind::Rural),
            other => Err(Error::InvalidScenario(format!("unknown scenario preset `{other}`"))),
        }
    }
}

/// Road layout the vehicles drive on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LaneGeometry {
    /// Manhattan grid of `blocks_x` by `blocks_y` blocks. Streets run along
    /// every block edge, including the outer boundary.
    Grid {
        block_width_m: f64,
        block_height_m: f64,
        blocks_x: usize,
        blocks_y: usize,
        lane_width_m: f64,
        lanes_per_direction: usize,
    },
    /// Straight road along +x starting at the origin.
    Freeway {
        length_m: f64,
        lane_width_m: f64,
        lanes_per_direction: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub carrier_freq_ghz: f64,
    pub num_v2i: usize,
    pub num_v2v: usize,
    pub subband_bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub v2i_tx_power_dbm: f64,
    pub v2v_max_power_dbm: f64,
    pub bs_position: [f64; 2],
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    pub vehicle_speed_kmh: f64,
    pub lane_geometry: LaneGeometry,
    pub shadow_sigma_v2i_db: f64,
    pub shadow_sigma_v2v_db: f64,
    pub bs_antenna_gain_dbi: f64,
    pub bs_noise_figure_db: f64,
    pub vehicle_antenna_gain_dbi: f64,
    pub vehicle_noise_figure_db: f64,
    pub pairing_radius_m: f64,
    pub turn_probability: f64,
    pub payload_bytes: f64,
    pub slot_duration_s: f64,
    pub max_latency_s: f64,
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind, num_v2i: usize, num_v2v: usize) -> Self {
        let (lane_geometry, bs_position, bs_height_m, vehicle_speed_kmh) = match kind {
            ScenarioKind::Urban => (
                LaneGeometry::Grid {
                    block_width_m: 433.0,
                    block_height_m: 250.0,
                    blocks_x: 3,
                    blocks_y: 3,
                    lane_width_m: 3.5,
                    lanes_per_direction: 2,
                },
                [649.5, 375.0],
                25.0,
                50.0,
            ),
            ScenarioKind::Highway => (
                LaneGeometry::Freeway {
                    length_m: 1500.0,
                    lane_width_m: 5.0,
                    lanes_per_direction: 3,
                },
                [750.0, -35.0],
                25.0,
                120.0,
            ),
            ScenarioKind::Rural => (
                LaneGeometry::Grid {
                    block_width_m: 1000.0,
                    block_height_m: 1000.0,
                    blocks_x: 3,
                    blocks_y: 3,
                    lane_width_m: 5.0,
                    lanes_per_direction: 2,
                },
                [1500.0, 1500.0],
                35.0,
                108.0,
            ),
        };
        ScenarioConfig {
            kind,
            carrier_freq_ghz: 2.0,
            num_v2i,
            num_v2v,
            subband_bandwidth_hz: 1e6,
            noise_power_dbm: -114.0,
            v2i_tx_power_dbm: 35.0,
            v2v_max_power_dbm: 23.0,
            bs_position,
            bs_height_m,
            vehicle_height_m: 1.5,
            vehicle_speed_kmh,
            lane_geometry,
            shadow_sigma_v2i_db: 8.0,
            shadow_sigma_v2v_db: 3.0,
            bs_antenna_gain_dbi: 8.0,
            bs_noise_figure_db: 5.0,
            vehicle_antenna_gain_dbi: 3.0,
            vehicle_noise_figure_db: 9.0,
            pairing_radius_m: 150.0,
            turn_probability: 0.4,
            payload_bytes: 1060.0,
            slot_duration_s: 1e-3,
            max_latency_s: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(msg.to_string()));
        if self.num_v2i == 0 {
            return bad("number of V2I links (sub-bands) must be at least 1");
        }
        if self.num_v2v == 0 {
            return bad("number of V2V pairs must be at least 1");
        }
        if !(self.subband_bandwidth_hz > 0.0 && self.subband_bandwidth_hz.is_finite()) {
            return bad("sub-band bandwidth must be positive");
        }
        let db_fields = [
            self.noise_power_dbm,
            self.v2i_tx_power_dbm,
            self.v2v_max_power_dbm,
            self.shadow_sigma_v2i_db,
            self.shadow_sigma_v2v_db,
            self.bs_antenna_gain_dbi,
            self.bs_noise_figure_db,
            self.vehicle_antenna_gain_dbi,
            self.vehicle_noise_figure_db,
        ];
        if db_fields.iter().any(|v| !v.is_finite()) {
            return bad("all dB fields must be finite");
        }
        if self.shadow_sigma_v2i_db < 0.0 || self.shadow_sigma_v2v_db < 0.0 {
            return bad("shadowing standard deviations must be non-negative");
        }
        if !(self.carrier_freq_ghz > 0.0) {
            return bad("carrier frequency must be positive");
        }
        if !(self.vehicle_speed_kmh >= 0.0 && self.vehicle_speed_kmh.is_finite()) {
            return bad("vehicle speed must be non-negative");
        }
        if !(self.pairing_radius_m > 0.0) {
            return bad("pairing radius must be positive");
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return bad("turn probability must lie in [0, 1]");
        }
        if !(self.payload_bytes >= 0.0 && self.payload_bytes.is_finite()) {
            return bad("payload must be non-negative");
        }
        if !(self.slot_duration_s > 0.0 && self.max_latency_s >= self.slot_duration_s) {
            return bad("slot duration must be positive and not exceed the latency bound");
        }
        match self.lane_geometry {
            LaneGeometry::Grid {
                block_width_m,
                block_height_m,
                blocks_x,
                blocks_y,
                lane_width_m,
                lanes_per_direction,
            } => {
                if !(block_width_m > 0.0 && block_height_m > 0.0 && lane_width_m > 0.0)
                    || blocks_x == 0
                    || blocks_y == 0
                    || lanes_per_direction == 0
                {
                    return bad("grid geometry needs positive sizes and at least one lane");
                }
            }
            LaneGeometry::Freeway {
                length_m,
                lane_width_m,
                lanes_per_direction,
            } => {
                if !(length_m > 0.0 && lane_width_m > 0.0) || lanes_per_direction == 0 {
                    return bad("freeway geometry needs positive sizes and at least one lane");
                }
            }
        }
        Ok(())
    }

    pub fn speed_mps(&self) -> f64 {
        self.vehicle_speed_kmh / 3.6
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn v2i_tx_power_w(&self) -> f64 {
        dbm_to_watts(self.v2i_tx_power_dbm)
    }

    pub fn v2v_max_power_w(&self) -> f64 {
        dbm_to_watts(self.v2v_max_power_dbm)
    }

    pub fn payload_bits(&self) -> f64 {
        self.payload_bytes * 8.0
    }

    /// Number of slots in one delivery window, T / Δ_T.
    pub fn window_slots(&self) -> u32 {
        (self.max_latency_s / self.slot_duration_s).round() as u32
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
