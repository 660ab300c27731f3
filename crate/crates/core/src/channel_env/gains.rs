//! Per-link channel gains, split into large-scale and small-scale factors.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::{distance, RoadLayout, VehicleState};
use super::pathloss::{pathloss_db, LinkGeometry, LinkType};
use super::scenario::{db_to_linear, ScenarioConfig};
use crate::rng::Rng;

/// One value per link (and per sub-band where the link may use any of them).
///
/// Index conventions: `v2v_own` and `v2v_bs` are `[k * M + m]`, `v2i_v2v` is
/// `[m * K + k]` (V2I `m` only occupies sub-band `m`), `v2v_v2v` is
/// `[(j * K + k) * M + m]` for transmitter `j` and receiver `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkField {
    pub v2i_bs: Vec<f64>,
    pub v2v_own: Vec<f64>,
    pub v2v_bs: Vec<f64>,
    pub v2i_v2v: Vec<f64>,
    pub v2v_v2v: Vec<f64>,
}

impl LinkField {
    pub fn filled(m: usize, k: usize, value: f64) -> Self {
        LinkField {
            v2i_bs: vec![value; m],
            v2v_own: vec![value; k * m],
            v2v_bs: vec![value; k * m],
            v2i_v2v: vec![value; m * k],
            v2v_v2v: vec![value; k * k * m],
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.v2i_bs
            .iter()
            .chain(&self.v2v_own)
            .chain(&self.v2v_bs)
            .chain(&self.v2i_v2v)
            .chain(&self.v2v_v2v)
            .copied()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.v2i_bs
            .iter_mut()
            .chain(self.v2v_own.iter_mut())
            .chain(self.v2v_bs.iter_mut())
            .chain(self.v2i_v2v.iter_mut())
            .chain(self.v2v_v2v.iter_mut())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub num_v2i: usize,
    pub num_v2v: usize,
    /// Path loss, shadowing and antenna/noise-figure budget (linear).
    pub large_scale: LinkField,
    /// Rayleigh power gains |h|^2 (unit-mean exponential).
    pub small_scale: LinkField,
}

impl ChannelGains {
    pub fn unit(num_v2i: usize, num_v2v: usize) -> Self {
        ChannelGains {
            num_v2i,
            num_v2v,
            large_scale: LinkField::filled(num_v2i, num_v2v, 1.0),
            small_scale: LinkField::filled(num_v2i, num_v2v, 1.0),
        }
    }

    /// V2I `m` to the BS on its own sub-band.
    pub fn h_mb(&self, m: usize) -> f64 {
        self.large_scale.v2i_bs[m] * self.small_scale.v2i_bs[m]
    }

    /// V2V `k` own link on sub-band `m`.
    pub fn g_kk(&self, k: usize, m: usize) -> f64 {
        let i = k * self.num_v2i + m;
        self.large_scale.v2v_own[i] * self.small_scale.v2v_own[i]
    }

    /// V2V transmitter `k` to the BS on sub-band `m`.
    pub fn g_kb(&self, k: usize, m: usize) -> f64 {
        let i = k * self.num_v2i + m;
        self.large_scale.v2v_bs[i] * self.small_scale.v2v_bs[i]
    }

    /// V2I transmitter `m` to V2V receiver `k` (on sub-band `m`).
    pub fn h_mk(&self, m: usize, k: usize) -> f64 {
        let i = m * self.num_v2v + k;
        self.large_scale.v2i_v2v[i] * self.small_scale.v2i_v2v[i]
    }

    /// V2V transmitter `j` to V2V receiver `k` on sub-band `m`.
    pub fn g_jk(&self, j: usize, k: usize, m: usize) -> f64 {
        let i = (j * self.num_v2v + k) * self.num_v2i + m;
        self.large_scale.v2v_v2v[i] * self.small_scale.v2v_v2v[i]
    }

    pub fn all_positive_finite(&self) -> bool {
        self.large_scale
            .values()
            .chain(self.small_scale.values())
            .all(|g| g > 0.0 && g.is_finite())
    }
}

/// Positions relevant to the link budget.
pub struct Placement<'a> {
    pub layout: &'a RoadLayout,
    pub v2i: &'a [VehicleState],
    pub v2v_tx: &'a [VehicleState],
    pub v2v_rx: &'a [VehicleState],
}

fn v2v_geometry(layout: &RoadLayout, grid: bool, a: &VehicleState, b: &VehicleState) -> LinkGeometry {
    if !grid || layout.same_street(a, b) {
        LinkGeometry::Los {
            distance_m: distance(a.position, b.position),
        }
    } else {
        let (leg1_m, leg2_m) = layout.corner_legs(a, b);
        LinkGeometry::Nlos { leg1_m, leg2_m }
    }
}

/// Deterministic large-scale gain budget in dB (negative path loss plus
/// antenna gains minus receiver noise figure), before shadowing.
pub struct LinkBudget {
    pub v2i_bs: Vec<f64>,
    pub v2v_own: Vec<f64>,
    pub v2v_bs: Vec<f64>,
    pub v2i_v2v: Vec<f64>,
    pub v2v_v2v: Vec<f64>,
}

pub fn link_budget_db(cfg: &ScenarioConfig, p: &Placement<'_>) -> LinkBudget {
    let grid = p.layout.intersection_spacing.is_some()
        && cfg.kind != super::scenario::ScenarioKind::Rural;
    let k_n = p.v2v_tx.len();
    let to_bs_gain = cfg.vehicle_antenna_gain_dbi + cfg.bs_antenna_gain_dbi - cfg.bs_noise_figure_db;
    let v2v_gain = 2.0 * cfg.vehicle_antenna_gain_dbi - cfg.vehicle_noise_figure_db;
    let dh = cfg.bs_height_m - cfg.vehicle_height_m;
    let to_bs = |v: &VehicleState| {
        let d2 = distance(v.position, cfg.bs_position);
        let d3 = (d2 * d2 + dh * dh).sqrt();
        to_bs_gain - pathloss_db(cfg.kind, LinkType::V2I, LinkGeometry::Los { distance_m: d3 }, cfg.carrier_freq_ghz)
    };
    let v2v = |a: &VehicleState, b: &VehicleState| {
        v2v_gain - pathloss_db(cfg.kind, LinkType::V2V, v2v_geometry(p.layout, grid, a, b), cfg.carrier_freq_ghz)
    };
    let mut v2v_v2v = Vec::with_capacity(k_n * k_n);
    for j in 0..k_n {
        for k in 0..k_n {
            if j == k {
                v2v_v2v.push(v2v(&p.v2v_tx[k], &p.v2v_rx[k]));
            } else {
                v2v_v2v.push(v2v(&p.v2v_tx[j], &p.v2v_rx[k]));
            }
        }
    }
    LinkBudget {
        v2i_bs: p.v2i.iter().map(to_bs).collect(),
        v2v_own: p.v2v_tx.iter().zip(p.v2v_rx).map(|(t, r)| v2v(t, r)).collect(),
        v2v_bs: p.v2v_tx.iter().map(to_bs).collect(),
        v2i_v2v: p
            .v2i
            .iter()
            .flat_map(|t| p.v2v_rx.iter().map(move |r| (t, r)))
            .map(|(t, r)| v2v(t, r))
            .collect(),
        v2v_v2v,
    }
}

/// Recomputes the large-scale field with fresh log-normal shadowing.
pub fn draw_large_scale(cfg: &ScenarioConfig, placement: &Placement<'_>, rng: &mut Rng) -> LinkField {
    let m_n = placement.v2i.len();
    let k_n = placement.v2v_tx.len();
    let budget = link_budget_db(cfg, placement);
    let shadow_v2i = ShadowSampler::new(cfg.shadow_sigma_v2i_db);
    let shadow_v2v = ShadowSampler::new(cfg.shadow_sigma_v2v_db);
    let mut field = LinkField::filled(m_n, k_n, 0.0);
    for m in 0..m_n {
        field.v2i_bs[m] = db_to_linear(budget.v2i_bs[m] + shadow_v2i.sample(rng));
    }
    for k in 0..k_n {
        let own = db_to_linear(budget.v2v_own[k] + shadow_v2v.sample(rng));
        let bs = db_to_linear(budget.v2v_bs[k] + shadow_v2i.sample(rng));
        for m in 0..m_n {
            field.v2v_own[k * m_n + m] = own;
            field.v2v_bs[k * m_n + m] = bs;
        }
    }
    for i in 0..m_n * k_n {
        field.v2i_v2v[i] = db_to_linear(budget.v2i_v2v[i] + shadow_v2v.sample(rng));
    }
    for j in 0..k_n {
        for k in 0..k_n {
            let g = if j == k {
                field.v2v_own[k * m_n]
            } else {
                db_to_linear(budget.v2v_v2v[j * k_n + k] + shadow_v2v.sample(rng))
            };
            for m in 0..m_n {
                field.v2v_v2v[(j * k_n + k) * m_n + m] = g;
            }
        }
    }
    field
}

/// Redraws every small-scale coefficient.
pub fn draw_small_scale(field: &mut LinkField, rng: &mut Rng) {
    for g in field.values_mut() {
        *g = rayleigh_power(rng);
    }
}

/// |h|^2 for h with independent zero-mean, variance-1/2 real and imaginary
/// parts, i.e. a unit-mean exponential variate.
pub fn rayleigh_power(rng: &mut Rng) -> f64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    (0.5 * (re * re + im * im)).max(f64::MIN_POSITIVE)
}

/// Zero-mean normal shadowing in dB.
pub struct ShadowSampler {
    normal: Option<Normal<f64>>,
}

impl ShadowSampler {
    pub fn new(sigma_db: f64) -> Self {
        ShadowSampler {
            normal: (sigma_db > 0.0).then(|| Normal::new(0.0, sigma_db).expect("finite sigma")),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match &self.normal {
            Some(n) => n.sample(rng),
            None => {
                // Keep the stream position independent of sigma.
                let _: f64 = rng.random();
                0.0
            }
        }
    }
}
