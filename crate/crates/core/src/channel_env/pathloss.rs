//! Deterministic path-loss models.
//!
//! V2I links in urban and highway scenarios use 128.1 + 37.6 log10(d_km).
//! V2V links use the WINNER II B1 street-canyon model, LOS or one-corner
//! NLOS. The rural scenario uses the WINNER II D1 LOS model for every link.

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioKind;

/// Distances below this are treated as this value.
pub const MIN_DISTANCE_M: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkType {
    /// Vehicle to base station.
    V2I,
    /// Vehicle to vehicle.
    V2V,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LinkGeometry {
    Los { distance_m: f64 },
    /// Around one corner, with legs measured from each end to the corner.
    Nlos { leg1_m: f64, leg2_m: f64 },
}

pub fn pathloss_db(kind: ScenarioKind, link: LinkType, geometry: LinkGeometry, carrier_ghz: f64) -> f64 {
    match (kind, link) {
        (ScenarioKind::Rural, _) => rural_los(geometry.los_equivalent(), carrier_ghz),
        (_, LinkType::V2I) => v2i_macro(geometry.los_equivalent()),
        (_, LinkType::V2V) => match geometry {
            LinkGeometry::Los { distance_m } => v2v_los(distance_m, carrier_ghz),
            LinkGeometry::Nlos { leg1_m, leg2_m } => {
                v2v_nlos(leg1_m, leg2_m, carrier_ghz).min(v2v_nlos(leg2_m, leg1_m, carrier_ghz))
            }
        },
    }
}

impl LinkGeometry {
    fn los_equivalent(self) -> f64 {
        match self {
            LinkGeometry::Los { distance_m } => distance_m,
            LinkGeometry::Nlos { leg1_m, leg2_m } => leg1_m + leg2_m,
        }
    }
}

fn clamp(d: f64) -> f64 {
    d.max(MIN_DISTANCE_M)
}

fn v2i_macro(d_m: f64) -> f64 {
    128.1 + 37.6 * (clamp(d_m) / 1000.0).log10()
}

fn v2v_los(d_m: f64, fc_ghz: f64) -> f64 {
    22.7 * clamp(d_m).log10() + 41.0 + 20.0 * (fc_ghz / 5.0).log10()
}

fn v2v_nlos(d1_m: f64, d2_m: f64, fc_ghz: f64) -> f64 {
    let d1 = clamp(d1_m);
    let d2 = clamp(d2_m);
    let n = (2.8 - 0.0024 * d1).max(1.84);
    v2v_los(d1, fc_ghz) + 20.0 - 12.5 * n + 10.0 * n * d2.log10()
}

fn rural_los(d_m: f64, fc_ghz: f64) -> f64 {
    44.2 + 21.5 * clamp(d_m).log10() + 20.0 * (fc_ghz / 5.0).log10()
}
