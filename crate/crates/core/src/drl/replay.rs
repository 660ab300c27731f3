use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// One agent's transition.
///
/// `action` is the discrete head's index: the sub-band for the combined
/// DQN/DDPG agent, the joint (sub-band, power level) index for the
/// quantized baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub power_w: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub agent_id: usize,
    pub slot_index: u64,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` indices drawn uniformly with replacement, or `None` while the
    /// buffer holds fewer than `n` items.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Option<Vec<usize>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<&T>> {
        self.sample_indices(n, rng)
            .map(|idx| idx.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Two index sets of sizes `a` and `b` with no index in common.
    pub fn sample_disjoint(&self, a: usize, b: usize, rng: &mut Rng) -> Option<(Vec<usize>, Vec<usize>)> {
        if a == 0 || b == 0 || self.items.len() < a + b {
            return None;
        }
        let mut idx = index::sample(rng, self.items.len(), a + b).into_vec();
        let second = idx.split_off(a);
        Some((idx, second))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn overwrites_oldest() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(i);
        }
        assert_eq!(b.len(), 5);
        let mut items: Vec<i32> = b.iter().copied().collect();
        items.sort();
        assert_eq!(items, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn sampling_requires_enough_items() {
        let mut b = ReplayBuffer::new(10);
        let mut r = rng::stream(0, 0);
        b.push(1);
        assert!(b.sample(2, &mut r).is_none());
        b.push(2);
        assert_eq!(b.sample(2, &mut r).unwrap().len(), 2);
        assert!(b.sample_disjoint(1, 2, &mut r).is_none());
    }

    #[test]
    fn uniform_indices_chi_square() {
        let mut b = ReplayBuffer::new(20);
        for i in 0..20 {
            b.push(i);
        }
        let mut r = rng::stream(4, 0);
        let mut counts = [0f64; 20];
        let n = 100_000;
        for _ in 0..n / 10 {
            for i in b.sample_indices(10, &mut r).unwrap() {
                counts[i] += 1.0;
            }
        }
        let e = n as f64 / 20.0;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // 19 degrees of freedom; 99.9th percentile is 43.8.
        assert!(chi2 < 43.8, "chi2 {chi2}");
    }

    #[test]
    fn disjoint_draws() {
        let mut b = ReplayBuffer::new(50);
        for i in 0..50 {
            b.push(i);
        }
        let mut r = rng::stream(1, 0);
        let (a, c) = b.sample_disjoint(20, 25, &mut r).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(c.len(), 25);
        assert!(a.iter().all(|i| !c.contains(i)));
    }
}
