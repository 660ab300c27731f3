use serde::{Deserialize, Serialize};

use super::gains::ChannelGains;
use crate::error::{Error, Result};

/// Joint action of all V2V links for one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub subband: Vec<usize>,
    pub power_w: Vec<f64>,
}

impl Decision {
    pub fn validate(&self, num_v2i: usize, num_v2v: usize, max_power_w: f64) -> Result<()> {
        if self.subband.len() != num_v2v || self.power_w.len() != num_v2v {
            return Err(Error::InvalidDecision(format!(
                "expected {num_v2v} entries, got {} sub-bands and {} powers",
                self.subband.len(),
                self.power_w.len()
            )));
        }
        if let Some(k) = self.subband.iter().position(|&m| m >= num_v2i) {
            return Err(Error::InvalidDecision(format!(
                "link {k} selected sub-band {} of {num_v2i}",
                self.subband[k]
            )));
        }
        // Tolerate rounding at the upper bound.
        let limit = max_power_w * (1.0 + 1e-12);
        if let Some(k) = self.power_w.iter().position(|&p| !(0.0..=limit).contains(&p)) {
            return Err(Error::InvalidDecision(format!(
                "link {k} power {} W outside [0, {max_power_w}]",
                self.power_w[k]
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkRates {
    pub v2i_sinr: Vec<f64>,
    pub v2v_sinr: Vec<f64>,
    pub v2i_rate: Vec<f64>,
    pub v2v_rate: Vec<f64>,
}

impl LinkRates {
    pub fn v2i_sum_rate(&self) -> f64 {
        self.v2i_rate.iter().sum()
    }
}

/// Linear SINR of every V2I link and of every V2V link on its chosen
/// sub-band. Rates are left empty; see [`compute_rates`].
pub fn compute_sinr(
    gains: &ChannelGains,
    decision: &Decision,
    v2i_power_w: f64,
    noise_w: f64,
) -> LinkRates {
    let m_n = gains.num_v2i;
    let k_n = gains.num_v2v;
    let mut bs_interference = vec![0.0; m_n];
    for k in 0..k_n {
        let m = decision.subband[k];
        bs_interference[m] += decision.power_w[k] * gains.g_kb(k, m);
    }
    let v2i_sinr = (0..m_n)
        .map(|m| v2i_power_w * gains.h_mb(m) / (bs_interference[m] + noise_w))
        .collect();
    let v2v_sinr = (0..k_n)
        .map(|k| {
            let m = decision.subband[k];
            let mut interference = v2i_power_w * gains.h_mk(m, k) + noise_w;
            for j in (0..k_n).filter(|&j| j != k && decision.subband[j] == m) {
                interference += decision.power_w[j] * gains.g_jk(j, k, m);
            }
            decision.power_w[k] * gains.g_kk(k, m) / interference
        })
        .collect();
    LinkRates {
        v2i_sinr,
        v2v_sinr,
        v2i_rate: Vec::new(),
        v2v_rate: Vec::new(),
    }
}

/// Shannon rate W log2(1 + SINR) in bit/s for every link.
pub fn compute_rates(mut sinr: LinkRates, bandwidth_hz: f64) -> LinkRates {
    let rate = |g: &f64| bandwidth_hz * (1.0 + g).log2();
    sinr.v2i_rate = sinr.v2i_sinr.iter().map(rate).collect();
    sinr.v2v_rate = sinr.v2v_sinr.iter().map(rate).collect();
    sinr
}

/// Interference power (W) each V2V receiver would see on each sub-band,
/// `[k * M + m]`, given the other links' choices.
pub fn v2v_interference(gains: &ChannelGains, decision: &Decision, v2i_power_w: f64) -> Vec<f64> {
    let m_n = gains.num_v2i;
    let k_n = gains.num_v2v;
    let mut out = vec![0.0; k_n * m_n];
    for k in 0..k_n {
        for m in 0..m_n {
            out[k * m_n + m] = v2i_power_w * gains.h_mk(m, k);
        }
        for j in (0..k_n).filter(|&j| j != k) {
            let m = decision.subband[j];
            out[k * m_n + m] += decision.power_w[j] * gains.g_jk(j, k, m);
        }
    }
    out
}
