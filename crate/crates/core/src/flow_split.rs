//! Moving-window flow-split heuristic.

use std::collections::VecDeque;

/// Fractions `phi[ru][user]`; every user's column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSplit {
    pub num_rus: usize,
    pub num_users: usize,
    pub phi: Vec<f64>,
}

impl FlowSplit {
    pub fn get(&self, ru: usize, user: usize) -> f64 {
        self.phi[ru * self.num_users + user]
    }
}

pub fn uniform_flow_split(num_rus: usize, num_users: usize) -> FlowSplit {
    assert!(num_rus >= 1, "at least one RU");
    FlowSplit { num_rus, num_users, phi: vec![1.0 / num_rus as f64; num_rus * num_users] }
}

/// Observed per-`(ru, user)` rates of the last `capacity` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RateWindow {
    pub capacity: usize,
    pub num_rus: usize,
    pub num_users: usize,
    frames: VecDeque<Vec<f64>>,
}

impl RateWindow {
    pub fn new(capacity: usize, num_rus: usize, num_users: usize) -> Self {
        assert!(capacity >= 1, "window must hold at least one frame");
        Self { capacity, num_rus, num_users, frames: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, rates: Vec<f64>) {
        assert_eq!(rates.len(), self.num_rus * self.num_users);
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(rates);
    }

    /// Mean over the stored frames, which may be fewer than `capacity`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_rus * self.num_users];
        for f in &self.frames {
            for (a, b) in m.iter_mut().zip(f) {
                *a += b;
            }
        }
        let n = self.frames.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Normalises the windowed mean rate per user; a user with no observed rate
/// falls back to the uniform split.
pub fn estimate_flow_split(window: &RateWindow) -> FlowSplit {
    let (nm, nu) = (window.num_rus, window.num_users);
    if window.is_empty() {
        return uniform_flow_split(nm, nu);
    }
    let mean = window.mean();
    let mut phi = vec![0.0; nm * nu];
    for u in 0..nu {
        let total: f64 = (0..nm).map(|m| mean[m * nu + u]).sum();
        for m in 0..nm {
            phi[m * nu + u] = if total > 0.0 { mean[m * nu + u] / total } else { 1.0 / nm as f64 };
        }
    }
    FlowSplit { num_rus: nm, num_users: nu, phi }
}
