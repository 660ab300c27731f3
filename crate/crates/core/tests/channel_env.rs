mod common;

use common::{random_gains, rel, sinr_oracle};
use proptest::prelude::*;
use rand::Rng as _;
use v2x_core::channel_env::*;
use v2x_core::rng;

fn random_decision(r: &mut rng::Rng, m: usize, k: usize, p_max: f64) -> Decision {
    Decision {
        subband: (0..k).map(|_| r.random_range(0..m)).collect(),
        power_w: (0..k).map(|_| r.random_range(0.0..=p_max)).collect(),
    }
}

#[test]
fn sinr_matches_bruteforce_on_synthetic_gains() {
    let mut r = rng::stream(11, 0);
    for _ in 0..1000 {
        let (m, k) = (r.random_range(1..=2), r.random_range(1..=3));
        let g = random_gains(&mut r, m, k);
        let d = random_decision(&mut r, m, k, 0.2);
        let (pc, noise) = (r.random_range(0.1..5.0), 10f64.powf(r.random_range(-15.0..-12.0)));
        let got = compute_sinr(&g, &d, pc, noise);
        let (v2i, v2v) = sinr_oracle(&g, &d.subband, &d.power_w, pc, noise);
        for (a, b) in got.v2i_sinr.iter().zip(&v2i).chain(got.v2v_sinr.iter().zip(&v2v)) {
            assert!(rel(*a, *b) <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn environment_rates_match_bruteforce() {
    let mut r = rng::stream(12, 0);
    for i in 0..200 {
        let kind = ScenarioKind::ALL[i % 3];
        let (m, k) = (r.random_range(1..=2), r.random_range(1..=3));
        let cfg = ScenarioConfig::preset(kind, m, k);
        let env = Environment::build(&cfg, i as u64).unwrap();
        let d = random_decision(&mut r, m, k, cfg.v2v_max_power_w());
        let eval = env.evaluate(&d).unwrap();
        let (v2i, v2v) = sinr_oracle(env.gains(), &d.subband, &d.power_w, cfg.v2i_tx_power_w(), cfg.noise_power_w());
        let w = cfg.subband_bandwidth_hz;
        for (a, s) in eval.rates.v2i_rate.iter().zip(&v2i).chain(eval.rates.v2v_rate.iter().zip(&v2v)) {
            assert!(rel(*a, w * (1.0 + s).log2()) <= 1e-12);
        }
    }
}

#[test]
fn pathloss_hand_values() {
    let v2i = pathloss_db(ScenarioKind::Urban, LinkType::V2I, LinkGeometry::Los { distance_m: 500.0 }, 2.0);
    assert!((v2i - (128.1 + 37.6 * 0.5f64.log10())).abs() < 1e-12);
    assert!((v2i - 116.78).abs() < 0.005);
    let v2v = pathloss_db(ScenarioKind::Highway, LinkType::V2V, LinkGeometry::Los { distance_m: 10.0 }, 2.0);
    assert!((v2v - 55.74).abs() < 0.005);
    let floor = pathloss_db(ScenarioKind::Urban, LinkType::V2V, LinkGeometry::Los { distance_m: 1.0 }, 2.0);
    let at3 = pathloss_db(ScenarioKind::Urban, LinkType::V2V, LinkGeometry::Los { distance_m: 3.0 }, 2.0);
    assert_eq!(floor, at3);
}

const B: f64 = 8480.0;

fn slots_to_deliver(rate: f64) -> Option<(u32, u64)> {
    let mut t = PayloadTracker::new(1, B, 100, 1e-3, Redelivery::NextWindow);
    for s in 0..100u64 {
        if let Some(DeliveryEvent::Delivered { slots_used, .. }) = t.advance(&[rate], &[0.0], s).first() {
            return Some((*slots_used, s));
        }
    }
    None
}

#[test]
fn constant_rate_success_slot_count() {
    for rate in [1e5, 1.7e5, 8.48e5, 1e6, 2.5e6, 9e6] {
        let expected = (B / (1e-3 * rate)).ceil() as u32;
        let (used, slot) = slots_to_deliver(rate).unwrap();
        assert_eq!(used, expected, "rate {rate}");
        assert_eq!(slot, expected as u64 - 1);
    }
}

#[test]
fn constant_rate_timeout_at_window() {
    // 84,700 bit/s delivers 8470 bits in 100 slots: just short.
    for rate in [0.0, 84_700.0] {
        let mut t = PayloadTracker::new(1, B, 100, 1e-3, Redelivery::NextWindow);
        for s in 0..99 {
            assert!(t.advance(&[rate], &[0.0], s).is_empty());
        }
        assert_eq!(t.advance(&[rate], &[0.0], 99), vec![DeliveryEvent::TimedOut { link: 0 }]);
        assert_eq!(t.links[0].remaining_bits, B);
    }
}

#[test]
fn success_probability_fixture() {
    // Link 0 always delivers (10 slots), link 1 never, link 2 only in the
    // second window. Three windows: 3 + 0 + 1 successes out of 9.
    let mut t = PayloadTracker::new(3, B, 100, 1e-3, Redelivery::NextWindow);
    for s in 0..300u64 {
        let third = if (100..200).contains(&s) { 1e6 } else { 0.0 };
        t.advance(&[8.48e5, 0.0, third], &[0.0; 3], s);
    }
    assert_eq!(t.total_attempts(), 9);
    assert_eq!(t.links[0].success_flags, vec![true; 3]);
    assert_eq!(t.links[1].success_flags, vec![false; 3]);
    assert_eq!(t.links[2].success_flags, vec![false, true, false]);
    assert!((success_probability(&t).unwrap() - 4.0 / 9.0).abs() < 1e-15);
}

#[test]
fn immediate_redelivery_restarts_next_slot() {
    let mut t = PayloadTracker::new(1, B, 100, 1e-3, Redelivery::Immediate);
    let mut delivered = Vec::new();
    for s in 0..100u64 {
        for e in t.advance(&[8.48e5], &[0.0], s) {
            delivered.push((s, e));
        }
    }
    assert_eq!(delivered.len(), 10);
    assert_eq!(delivered[1].0, 19);
}

#[test]
fn idle_link_is_silent() {
    let cfg = ScenarioConfig::preset(ScenarioKind::Urban, 2, 2);
    let mut env = Environment::build(&cfg, 3).unwrap();
    env.payloads_mut().links[0].idle = true;
    let d = Decision {
        subband: vec![0, 0],
        power_w: vec![cfg.v2v_max_power_w(); 2],
    };
    let eval = env.evaluate(&d).unwrap();
    assert_eq!(eval.applied.power_w[0], 0.0);
    assert_eq!(eval.rates.v2v_rate[0], 0.0);
    let (_, v2v) = sinr_oracle(env.gains(), &d.subband, &[0.0, cfg.v2v_max_power_w()], cfg.v2i_tx_power_w(), cfg.noise_power_w());
    assert!(rel(eval.rates.v2v_sinr[1], v2v[1]) <= 1e-12);
}

#[test]
fn large_scale_fading_holds_within_window() {
    let cfg = ScenarioConfig::preset(ScenarioKind::Highway, 2, 3);
    let mut env = Environment::build(&cfg, 5).unwrap();
    let d = Decision {
        subband: vec![0, 1, 0],
        power_w: vec![0.0; 3],
    };
    let first = env.gains().large_scale.clone();
    let small = env.gains().small_scale.clone();
    for _ in 0..99 {
        let e = env.evaluate(&d).unwrap();
        env.commit(&e);
        assert_eq!(env.gains().large_scale, first);
    }
    assert_ne!(env.gains().small_scale, small);
    let e = env.evaluate(&d).unwrap();
    env.commit(&e);
    assert_ne!(env.gains().large_scale, first);
}

#[test]
fn same_seed_same_world() {
    let cfg = ScenarioConfig::preset(ScenarioKind::Urban, 4, 4);
    let a = Environment::build(&cfg, 9).unwrap();
    let b = Environment::build(&cfg, 9).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = Environment::build(&cfg, 10).unwrap();
    assert_ne!(a.snapshot().gains, c.snapshot().gains);
}

#[test]
fn invalid_decisions_are_rejected() {
    let cfg = ScenarioConfig::preset(ScenarioKind::Urban, 2, 2);
    let env = Environment::build(&cfg, 1).unwrap();
    let bad_band = Decision {
        subband: vec![0, 2],
        power_w: vec![0.0, 0.0],
    };
    assert!(env.evaluate(&bad_band).is_err());
    let bad_power = Decision {
        subband: vec![0, 1],
        power_w: vec![0.0, 1.0],
    };
    assert!(env.evaluate(&bad_power).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gains_positive_and_rates_nonnegative(seed in 0u64..10_000, kind in 0usize..3, m in 1usize..5, k in 1usize..6) {
        let cfg = ScenarioConfig::preset(ScenarioKind::ALL[kind], m, k);
        let mut env = Environment::build(&cfg, seed).unwrap();
        let mut r = rng::stream(seed, 99);
        for _ in 0..3 {
            prop_assert!(env.gains().all_positive_finite());
            let d = random_decision(&mut r, m, k, cfg.v2v_max_power_w());
            let e = env.evaluate(&d).unwrap();
            prop_assert!(e.rates.v2i_sinr.iter().chain(&e.rates.v2v_sinr).all(|s| *s >= 0.0 && s.is_finite()));
            prop_assert!(e.rates.v2i_rate.iter().chain(&e.rates.v2v_rate).all(|s| *s >= 0.0));
            env.commit(&e);
        }
    }

    #[test]
    fn remaining_bits_within_bounds(rates in proptest::collection::vec(0.0f64..3e6, 1..250)) {
        let mut t = PayloadTracker::new(1, B, 100, 1e-3, Redelivery::Immediate);
        for (s, r) in rates.iter().enumerate() {
            t.advance(&[*r], &[0.0], s as u64);
            let l = &t.links[0];
            prop_assert!((0.0..=B).contains(&l.remaining_bits));
            prop_assert!(l.remaining_slots <= 100);
            prop_assert_eq!(l.success_flags.len() as u64, l.attempts);
        }
    }
}
