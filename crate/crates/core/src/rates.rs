//! Rate equations, queue recursion, latency extraction, and the utility.

use crate::config::{LatencyConstants, RbGrid, ServiceClass, Slice, SystemConfig};
use statrs::function::erf::erfc;
use std::f64::consts::{LOG2_E, SQRT_2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("probability {0} outside (0,1)")]
    Domain(f64),
    #[error("RB {rb} has SNR {snr} below the uRLLC floor {floor}")]
    SnrFloor { rb: usize, snr: f64, floor: f64 },
}

/// Gaussian tail probability Q(x) = erfc(x/sqrt 2)/2.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Acklam's rational approximation of the standard normal quantile.
fn normal_quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] =
        [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const LOW: f64 = 0.02425;
    if p < LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the Gaussian Q-function: returns x with Q(x) = p.
pub fn inverse_q(p: f64) -> Result<f64, RateError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RateError::Domain(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut x = -normal_quantile_seed(p);
    // Halley steps on Q(x) - p; Q'(x) = -phi(x).
    for _ in 0..3 {
        let e = q_function(x) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
        x += u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// Finite-blocklength back-off Psi = Q^-1(P_e) / sqrt(delta * beta), with
/// channel dispersion V fixed to 1.
pub fn fbl_penalty(error_prob: f64, tti_s: f64, rb_bandwidth_hz: f64) -> Result<f64, RateError> {
    Ok(inverse_q(error_prob)? / (tti_s * rb_bandwidth_hz).sqrt())
}

/// One RB as seen by a single `(ru, user)` link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbLink {
    pub rb_bandwidth_hz: f64,
    pub power_w: f64,
    pub gain: f64,
    pub assigned: bool,
}

impl RbLink {
    pub fn snr(&self, noise_w: f64) -> f64 {
        self.power_w * self.gain / noise_w
    }
}

/// Shannon rate over the assigned RBs, bits/s.
pub fn embb_rate(links: &[RbLink], noise_w: f64) -> f64 {
    links
        .iter()
        .filter(|l| l.assigned)
        .map(|l| l.rb_bandwidth_hz * (1.0 + l.snr(noise_w)).log2())
        .sum()
}

/// Finite-blocklength rate over the assigned RBs, bits/s. Every assigned RB
/// must meet the SNR floor.
pub fn urllc_rate(links: &[RbLink], noise_w: f64, psi: f64, snr_floor: f64) -> Result<f64, RateError> {
    let mut total = 0.0;
    for (rb, l) in links.iter().enumerate().filter(|(_, l)| l.assigned) {
        let snr = l.snr(noise_w);
        if snr < snr_floor {
            return Err(RateError::SnrFloor { rb, snr, floor: snr_floor });
        }
        total += l.rb_bandwidth_hz * ((1.0 + snr).log2() - LOG2_E * psi);
    }
    Ok(total)
}

/// Indices of unassigned RBs that nevertheless carry power.
pub fn big_m_violations(links: &[RbLink]) -> Vec<usize> {
    links
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.assigned && l.power_w > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// (q + arrivals - served)^+ in bits.
pub fn update_queue(q: u64, arrival_bits: u64, served_bits: u64) -> u64 {
    (q + arrival_bits).saturating_sub(served_bits)
}

/// Binary assignment of one slice, laid out `[ru][user][rb][tti]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceAssignment {
    pub num_rbs: usize,
    pub num_ttis: usize,
    pub cells: Vec<bool>,
}

/// RB assignment pi for one frame. The service class of every entry is that
/// of its user, so class consistency holds by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RbAssignment {
    pub num_rus: usize,
    pub num_users: usize,
    pub slices: [SliceAssignment; 2],
}

impl RbAssignment {
    pub fn empty(num_rus: usize, num_users: usize, grid: &RbGrid) -> Self {
        let mk = |s: Slice| {
            let g = grid.slice(s);
            SliceAssignment {
                num_rbs: g.num_rbs,
                num_ttis: g.num_ttis,
                cells: vec![false; num_rus * num_users * g.num_rbs * g.num_ttis],
            }
        };
        Self { num_rus, num_users, slices: [mk(Slice::Embb), mk(Slice::Urllc)] }
    }

    fn offset(&self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize) -> usize {
        let sa = &self.slices[s.index()];
        ((ru * self.num_users + user) * sa.num_rbs + rb) * sa.num_ttis + tti
    }

    pub fn get(&self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize) -> bool {
        self.slices[s.index()].cells[self.offset(s, ru, user, rb, tti)]
    }

    pub fn set(&mut self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize, on: bool) {
        let k = self.offset(s, ru, user, rb, tti);
        self.slices[s.index()].cells[k] = on;
    }

    /// All `(ru, user)` pairs holding RB `(rb, tti)` of slice `s`.
    pub fn holders(&self, s: Slice, rb: usize, tti: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for ru in 0..self.num_rus {
            for user in 0..self.num_users {
                if self.get(s, ru, user, rb, tti) {
                    out.push((ru, user));
                }
            }
        }
        out
    }

    /// The single holder of the RB, if exactly one exists.
    pub fn owner(&self, s: Slice, rb: usize, tti: usize) -> Option<(usize, usize)> {
        let h = self.holders(s, rb, tti);
        (h.len() == 1).then(|| h[0])
    }

    /// RBs of user `user` (over all RUs) in slice `s` within the first `ttis` TTIs.
    pub fn count_user(&self, s: Slice, user: usize, ttis: usize) -> usize {
        let sa = &self.slices[s.index()];
        let mut n = 0;
        for ru in 0..self.num_rus {
            for rb in 0..sa.num_rbs {
                for tti in 0..ttis.min(sa.num_ttis) {
                    n += self.get(s, ru, user, rb, tti) as usize;
                }
            }
        }
        n
    }

    pub fn total_assigned(&self) -> usize {
        self.slices.iter().map(|s| s.cells.iter().filter(|c| **c).count()).sum()
    }
}

/// Backlog per sub-flow `(ru, user)` in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState {
    pub num_rus: usize,
    pub num_users: usize,
    pub bits: Vec<u64>,
}

impl QueueState {
    pub fn zeros(num_rus: usize, num_users: usize) -> Self {
        Self { num_rus, num_users, bits: vec![0; num_rus * num_users] }
    }

    pub fn get(&self, ru: usize, user: usize) -> u64 {
        self.bits[ru * self.num_users + user]
    }

    pub fn get_mut(&mut self, ru: usize, user: usize) -> &mut u64 {
        &mut self.bits[ru * self.num_users + user]
    }

    pub fn ru_total(&self, ru: usize) -> u64 {
        self.bits[ru * self.num_users..(ru + 1) * self.num_users].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.bits.iter().sum()
    }

    /// Total backlog of users of one class.
    pub fn class_total(&self, config: &SystemConfig, class: ServiceClass) -> u64 {
        (0..self.num_rus)
            .flat_map(|ru| (0..self.num_users).map(move |u| (ru, u)))
            .filter(|(_, u)| config.user_class(*u) == class)
            .map(|(ru, u)| self.get(ru, u))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UserLatency {
    Scheduled(f64),
    /// The user has arrivals but no RB.
    Unscheduled,
    /// No arrivals and no RB.
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// One entry per uRLLC user, in user order.
    pub per_user: Vec<(usize, UserLatency)>,
}

impl LatencyReport {
    /// Worst latency among scheduled users.
    pub fn worst(&self) -> Option<f64> {
        self.per_user
            .iter()
            .filter_map(|(_, l)| match l {
                UserLatency::Scheduled(t) => Some(*t),
                _ => None,
            })
            .reduce(f64::max)
    }

    pub fn unscheduled(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_user
            .iter()
            .filter(|(_, l)| matches!(l, UserLatency::Unscheduled))
            .map(|(u, _)| *u)
    }
}

/// Per uRLLC user: fixed constants plus delta_i times the largest 1-based TTI
/// index holding any of its RBs (over RUs and slices).
pub fn worst_urllc_latency(
    pi: &RbAssignment,
    grid: &RbGrid,
    constants: &LatencyConstants,
    config: &SystemConfig,
    has_arrivals: &[bool],
) -> LatencyReport {
    let per_user = config
        .urllc_user_ids()
        .map(|u| {
            let mut tx: Option<f64> = None;
            for s in Slice::ALL {
                let sg = grid.slice(s);
                for ru in 0..pi.num_rus {
                    for rb in 0..sg.num_rbs {
                        for tti in 0..sg.num_ttis {
                            if pi.get(s, ru, u, rb, tti) {
                                let t = sg.tti_duration_s * (tti + 1) as f64;
                                tx = Some(tx.map_or(t, |v: f64| v.max(t)));
                            }
                        }
                    }
                }
            }
            let lat = match tx {
                Some(t) => UserLatency::Scheduled(constants.total() + t),
                None if has_arrivals[u] => UserLatency::Unscheduled,
                None => UserLatency::Idle,
            };
            (u, lat)
        })
        .collect();
    LatencyReport { per_user }
}

/// omega * sum(q_bar)/q0 + (1 - omega) * max(tau_bar)/tau0.
pub fn utility(avg_queues: &[f64], worst_latency: f64, omega: f64, q0: f64, tau0: f64) -> f64 {
    omega * avg_queues.iter().sum::<f64>() / q0 + (1.0 - omega) * worst_latency / tau0
}
