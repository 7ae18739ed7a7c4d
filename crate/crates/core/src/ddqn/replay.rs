//! Bounded FIFO replay memory with uniform sampling.

use rand::Rng;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    /// One choice index per head.
    pub action: Vec<usize>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last frame of an episode; its target does not bootstrap.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be positive");
        Self { capacity, items: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn store(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> &Experience {
        &self.items[i]
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Experience> {
        self.sample_indices(n, rng).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn exp(r: f64) -> Experience {
        Experience { state: vec![r], action: vec![0], reward: r, next_state: vec![r], terminal: false }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2);
        (0..3).for_each(|k| b.store(exp(k as f64)));
        assert_eq!(b.len(), 2);
        assert_eq!(b.get(0).reward, 1.0);
        assert_eq!(b.get(1).reward, 2.0);
    }

    #[test]
    fn single_item_sample() {
        let mut b = ReplayBuffer::new(4);
        b.store(exp(5.0));
        let mut rng = stream_rng(0, Stream::Replay, 0);
        assert_eq!(b.sample(1, &mut rng)[0].reward, 5.0);
    }

    #[test]
    fn large_capacity_accepted() {
        let mut b = ReplayBuffer::new(1_000_000);
        b.store(exp(0.0));
        assert_eq!(b.capacity(), 1_000_000);
        assert_eq!(b.len(), 1);
    }
}
