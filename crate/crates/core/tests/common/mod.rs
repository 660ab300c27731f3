#![allow(dead_code)]

use v2x_core::neuralnet::{Head, ParamSet};
use v2x_core::rng;
use rand::Rng as _;

/// Central differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise relative error, with a small floor on the scale.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Random layer sizes with at most `max_units` per layer.
pub fn random_sizes(r: &mut rng::Rng, max_units: usize, out: usize) -> Vec<usize> {
    let depth = r.random_range(1..=3);
    let mut sizes = vec![r.random_range(1..=max_units)];
    for _ in 0..depth {
        sizes.push(r.random_range(1..=max_units));
    }
    sizes.push(out);
    sizes
}

/// Random net with nonzero biases so ReLU kinks are not aligned.
pub fn random_net(sizes: &[usize], head: Head, seed: u64) -> ParamSet {
    let p = ParamSet::init(sizes, head, seed);
    let mut r = rng::stream(seed, 99);
    let flat: Vec<f64> = p.to_flat().iter().map(|w| w + r.random_range(-0.1..0.1)).collect();
    p.with_flat(&flat).unwrap()
}

pub fn random_matrix(r: &mut rng::Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

/// Random gains with every factor spread over several decades.
pub fn random_gains(r: &mut rng::Rng, m: usize, k: usize) -> v2x_core::channel_env::ChannelGains {
    let mut g = v2x_core::channel_env::ChannelGains::unit(m, k);
    for v in g.large_scale.v2i_bs.iter_mut()
        .chain(g.large_scale.v2v_own.iter_mut())
        .chain(g.large_scale.v2v_bs.iter_mut())
        .chain(g.large_scale.v2i_v2v.iter_mut())
        .chain(g.large_scale.v2v_v2v.iter_mut())
    {
        *v = 10f64.powf(r.random_range(-13.0..-6.0));
    }
    for v in g.small_scale.v2i_bs.iter_mut()
        .chain(g.small_scale.v2v_own.iter_mut())
        .chain(g.small_scale.v2v_bs.iter_mut())
        .chain(g.small_scale.v2i_v2v.iter_mut())
        .chain(g.small_scale.v2v_v2v.iter_mut())
    {
        *v = r.random_range(0.01..4.0);
    }
    g
}

/// SINR by explicit summation over the one-hot allocation matrix rho[k][m],
/// reading the raw fields with their documented index layout.
pub fn sinr_oracle(
    g: &v2x_core::channel_env::ChannelGains,
    subband: &[usize],
    power: &[f64],
    pc: f64,
    noise: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (m_n, k_n) = (g.num_v2i, g.num_v2v);
    let (ls, ss) = (&g.large_scale, &g.small_scale);
    let rho = |k: usize, m: usize| if subband[k] == m { 1.0 } else { 0.0 };
    let own = |k: usize, m: usize| ls.v2v_own[k * m_n + m] * ss.v2v_own[k * m_n + m];
    let to_bs = |k: usize, m: usize| ls.v2v_bs[k * m_n + m] * ss.v2v_bs[k * m_n + m];
    let cross_i = |m: usize, k: usize| ls.v2i_v2v[m * k_n + k] * ss.v2i_v2v[m * k_n + k];
    let cross_v = |j: usize, k: usize, m: usize| {
        let i = (j * k_n + k) * m_n + m;
        ls.v2v_v2v[i] * ss.v2v_v2v[i]
    };
    let v2i = (0..m_n)
        .map(|m| {
            let mut i = 0.0;
            for k in 0..k_n {
                i += rho(k, m) * power[k] * to_bs(k, m);
            }
            pc * ls.v2i_bs[m] * ss.v2i_bs[m] / (noise + i)
        })
        .collect();
    let v2v = (0..k_n)
        .map(|k| {
            let mut num = 0.0;
            let mut den = 0.0;
            for m in 0..m_n {
                num += rho(k, m) * power[k] * own(k, m);
                let mut i = pc * cross_i(m, k);
                for j in 0..k_n {
                    if j != k {
                        i += rho(j, m) * power[j] * cross_v(j, k, m);
                    }
                }
                den += rho(k, m) * (noise + i);
            }
            num / den
        })
        .collect();
    (v2i, v2v)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
