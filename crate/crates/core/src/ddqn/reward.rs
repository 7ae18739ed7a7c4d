//! Frame-start constraint screening and the shared reward.

use crate::config::{overflow_window_ttis, RbGrid, Slice, SystemConfig};
use crate::rates::{worst_urllc_latency, RbAssignment, UserLatency};
use crate::slicing::SliceQuotas;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// More than one `(ru, user)` holds the same RB.
    Orthogonality { slice: Slice, rb: usize, tti: usize, holders: usize },
    /// A uRLLC user got fewer eMBB-slice RBs in the overflow window than its quota.
    UrllcOverflow { user: usize, assigned: usize, required: u64 },
    /// An eMBB user got fewer uRLLC-slice RBs than its quota.
    EmbbQuota { user: usize, assigned: usize, required: u64 },
    Latency { user: usize, latency_s: f64 },
    Unscheduled { user: usize },
}

pub fn check_constraints(
    pi: &RbAssignment,
    quotas: &SliceQuotas,
    arrivals: &[u64],
    grid: &RbGrid,
    config: &SystemConfig,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in Slice::ALL {
        let sg = grid.slice(s);
        for tti in 0..sg.num_ttis {
            for rb in 0..sg.num_rbs {
                let holders = pi.holders(s, rb, tti).len();
                if holders > 1 {
                    out.push(Violation::Orthogonality { slice: s, rb, tti, holders });
                }
            }
        }
    }
    let window = overflow_window_ttis(config, grid);
    for (k, user) in config.urllc_user_ids().enumerate() {
        let assigned = pi.count_user(Slice::Embb, user, window);
        if (assigned as u64) < quotas.e_ur[k] {
            out.push(Violation::UrllcOverflow { user, assigned, required: quotas.e_ur[k] });
        }
    }
    let t2 = grid.slice(Slice::Urllc).num_ttis;
    for user in config.embb_user_ids() {
        let assigned = pi.count_user(Slice::Urllc, user, t2);
        if (assigned as u64) < quotas.e_em {
            out.push(Violation::EmbbQuota { user, assigned, required: quotas.e_em });
        }
    }
    let has: Vec<bool> = arrivals.iter().map(|&a| a > 0).collect();
    for (user, lat) in worst_urllc_latency(pi, grid, &config.latency, config, &has).per_user {
        match lat {
            UserLatency::Scheduled(t) if t > config.qos.latency_budget_s => {
                out.push(Violation::Latency { user, latency_s: t });
            }
            UserLatency::Unscheduled => out.push(Violation::Unscheduled { user }),
            _ => {}
        }
    }
    out
}

/// Penalty sum when anything was violated, otherwise the weighted eMBB
/// volume minus the weighted worst uRLLC latency.
pub fn compute_reward(embb_bits: f64, worst_latency_s: f64, violations: usize, config: &SystemConfig) -> f64 {
    let u = &config.utility;
    if violations > 0 {
        return u.penalty_value * violations as f64;
    }
    u.omega * embb_bits / config.ref_rate_bits() - (1.0 - u.omega) * worst_latency_s / u.ref_latency_s
}
