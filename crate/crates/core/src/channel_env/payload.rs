//! Per-link payload delivery accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual payload (bits) treated as fully delivered.
pub const DELIVERY_TOLERANCE_BITS: f64 = 1e-6;

/// What a link does after a delivery attempt completes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Redelivery {
    /// A new payload starts in the next slot, whatever the outcome.
    Immediate,
    /// After an early success the link stays silent until its current
    /// latency window ends; the next payload starts with the next window.
    NextWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPayload {
    pub remaining_bits: f64,
    pub remaining_slots: u32,
    pub start_slot: u64,
    pub success_flags: Vec<bool>,
    pub attempts: u64,
    /// Delivered and waiting for the next window.
    pub idle: bool,
    /// Spectral efficiency in the slot the last payload completed.
    pub delivered_se: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeliveryEvent {
    Delivered { link: usize, slots_used: u32 },
    TimedOut { link: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadTracker {
    pub links: Vec<LinkPayload>,
    pub payload_bits: f64,
    pub window_slots: u32,
    pub slot_duration_s: f64,
    pub redelivery: Redelivery,
}

impl PayloadTracker {
    pub fn new(num_links: usize, payload_bits: f64, window_slots: u32, slot_duration_s: f64, redelivery: Redelivery) -> Self {
        let mut t = PayloadTracker {
            links: Vec::with_capacity(num_links),
            payload_bits,
            window_slots,
            slot_duration_s,
            redelivery,
        };
        for _ in 0..num_links {
            t.links.push(LinkPayload {
                remaining_bits: payload_bits,
                remaining_slots: window_slots,
                start_slot: 0,
                success_flags: Vec::new(),
                attempts: 0,
                idle: false,
                delivered_se: None,
            });
        }
        t
    }

    /// Starts a fresh payload on every link at `slot`, keeping history.
    pub fn restart_all(&mut self, slot: u64) {
        let (b, w) = (self.payload_bits, self.window_slots);
        for l in &mut self.links {
            restart(l, b, w, slot);
        }
    }

    /// Clears all history and restarts at `slot`.
    pub fn reset(&mut self, slot: u64) {
        for l in &mut self.links {
            l.success_flags.clear();
            l.attempts = 0;
        }
        self.restart_all(slot);
    }

    pub fn is_active(&self, k: usize) -> bool {
        !self.links[k].idle
    }

    /// Fraction of the payload still to deliver (0 when idle or B = 0).
    pub fn remaining_load_frac(&self, k: usize) -> f64 {
        if self.payload_bits > 0.0 {
            (self.links[k].remaining_bits / self.payload_bits).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn remaining_time_frac(&self, k: usize) -> f64 {
        self.links[k].remaining_slots as f64 / self.window_slots as f64
    }

    /// Applies one slot of V2V rates (bit/s) observed at `slot`.
    pub fn advance(&mut self, rates_bps: &[f64], se: &[f64], slot: u64) -> Vec<DeliveryEvent> {
        let (b, w, dt, mode) = (self.payload_bits, self.window_slots, self.slot_duration_s, self.redelivery);
        let mut events = Vec::new();
        for (k, l) in self.links.iter_mut().enumerate() {
            l.remaining_slots = l.remaining_slots.saturating_sub(1);
            if l.idle {
                if l.remaining_slots == 0 {
                    restart(l, b, w, slot + 1);
                }
                continue;
            }
            l.remaining_bits = (l.remaining_bits - dt * rates_bps[k]).max(0.0);
            if l.remaining_bits <= DELIVERY_TOLERANCE_BITS {
                l.remaining_bits = 0.0;
                l.success_flags.push(true);
                l.attempts += 1;
                l.delivered_se = Some(se.get(k).copied().unwrap_or(0.0));
                events.push(DeliveryEvent::Delivered {
                    link: k,
                    slots_used: w - l.remaining_slots,
                });
                match mode {
                    Redelivery::Immediate => restart(l, b, w, slot + 1),
                    Redelivery::NextWindow if l.remaining_slots == 0 => restart(l, b, w, slot + 1),
                    Redelivery::NextWindow => l.idle = true,
                }
            } else if l.remaining_slots == 0 {
                l.success_flags.push(false);
                l.attempts += 1;
                events.push(DeliveryEvent::TimedOut { link: k });
                restart(l, b, w, slot + 1);
            }
        }
        events
    }

    pub fn recorded_flags(&self) -> usize {
        self.links.iter().map(|l| l.success_flags.len()).sum()
    }

    pub fn total_attempts(&self) -> u64 {
        self.links.iter().map(|l| l.attempts).sum()
    }
}

fn restart(l: &mut LinkPayload, payload_bits: f64, window_slots: u32, slot: u64) {
    l.remaining_bits = payload_bits;
    l.remaining_slots = window_slots;
    l.start_slot = slot;
    l.idle = false;
    l.delivered_se = None;
}

/// Σ successes / Σ attempts over all links.
pub fn success_probability(tracker: &PayloadTracker) -> Result<f64> {
    let attempts = tracker.total_attempts();
    if attempts == 0 {
        return Err(Error::NoDeliveryAttempts);
    }
    let successes: usize = tracker
        .links
        .iter()
        .map(|l| l.success_flags.iter().filter(|&&f| f).count())
        .sum();
    Ok(successes as f64 / attempts as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: f64 = 8480.0;

    fn run_constant(rate: f64, mode: Redelivery, slots: u64) -> (PayloadTracker, Vec<(u64, DeliveryEvent)>) {
        let mut t = PayloadTracker::new(1, B, 100, 1e-3, mode);
        let mut log = Vec::new();
        for s in 0..slots {
            for e in t.advance(&[rate], &[rate / 1e6], s) {
                log.push((s, e));
            }
        }
        (t, log)
    }

    #[test]
    fn success_after_ten_slots() {
        let (_, log) = run_constant(B / (10.0 * 1e-3), Redelivery::Immediate, 10);
        assert_eq!(log, vec![(9, DeliveryEvent::Delivered { link: 0, slots_used: 10 })]);
    }

    #[test]
    fn zero_rate_times_out_at_window() {
        let (t, log) = run_constant(0.0, Redelivery::Immediate, 100);
        assert_eq!(log, vec![(99, DeliveryEvent::TimedOut { link: 0 })]);
        assert_eq!(t.links[0].success_flags, vec![false]);
        assert_eq!(t.links[0].start_slot, 100);
    }

    #[test]
    fn zero_payload_is_immediate_success() {
        let mut t = PayloadTracker::new(2, 0.0, 100, 1e-3, Redelivery::Immediate);
        let ev = t.advance(&[0.0, 0.0], &[0.0, 0.0], 0);
        assert_eq!(ev.len(), 2);
        assert!(t.links.iter().all(|l| l.success_flags == vec![true]));
    }

    #[test]
    fn next_window_idles_until_window_end() {
        let (t, log) = run_constant(B / (10.0 * 1e-3), Redelivery::NextWindow, 250);
        let delivered: Vec<u64> = log.iter().map(|(s, _)| *s).collect();
        assert_eq!(delivered, vec![9, 109, 209]);
        assert_eq!(t.links[0].attempts, 3);
        assert!(t.links[0].idle);
    }

    #[test]
    fn success_probability_counts() {
        let mut t = PayloadTracker::new(2, B, 100, 1e-3, Redelivery::Immediate);
        t.links[0].success_flags = vec![true, true, false];
        t.links[0].attempts = 3;
        t.links[1].success_flags = vec![false];
        t.links[1].attempts = 1;
        assert_eq!(success_probability(&t).unwrap(), 0.5);
    }

    #[test]
    fn no_attempts_is_an_error() {
        let t = PayloadTracker::new(2, B, 100, 1e-3, Redelivery::Immediate);
        assert!(matches!(success_probability(&t), Err(Error::NoDeliveryAttempts)));
    }
}
