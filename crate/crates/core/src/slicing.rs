//! uRLLC slice capacity and the per-frame slice-aware RB quotas.

use crate::config::{urllc_window_ttis, RbGrid, Slice, SystemConfig};

pub use crate::config::split_bandwidth;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceQuotas {
    pub omega: u64,
    /// Indexed by position among uRLLC users.
    pub omega_u: Vec<u64>,
    pub e_ur: Vec<u64>,
    /// One value shared by all eMBB users.
    pub e_em: u64,
}

/// RBs of the uRLLC slice that fit inside the latency budget.
pub fn urllc_capacity(grid: &RbGrid, window_ttis: usize) -> u64 {
    (grid.slice(Slice::Urllc).num_rbs * window_ttis) as u64
}

/// Proportional share of `omega` by arrivals, rounded by largest remainder.
/// Ties in the remainder go to the lower index.
pub fn per_user_capacity(lambda_ur: &[u64], omega: u64) -> Vec<u64> {
    let total: u64 = lambda_ur.iter().sum();
    if total == 0 {
        return vec![0; lambda_ur.len()];
    }
    // Exact integer arithmetic: share_u = lambda_u * omega / total.
    let mut out: Vec<u64> = lambda_ur.iter().map(|&l| l * omega / total).collect();
    let rems: Vec<u64> = lambda_ur.iter().map(|&l| l * omega % total).collect();
    let mut left = omega - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..lambda_ur.len()).collect();
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &u in &order {
        if left == 0 {
            break;
        }
        if rems[u] > 0 {
            out[u] += 1;
            left -= 1;
        }
    }
    out
}

/// Quotas for one frame from the uRLLC arrivals of that frame.
pub fn quotas_from(
    lambda_ur: &[u64],
    omega: u64,
    urllc_cells: u64,
    embb_users: usize,
    divisor: u32,
) -> SliceQuotas {
    let omega_u = per_user_capacity(lambda_ur, omega);
    let d = divisor.max(1) as u64;
    let e_ur = lambda_ur
        .iter()
        .zip(&omega_u)
        .map(|(&l, &o)| l.saturating_sub(o).div_ceil(d))
        .collect();
    let kept: u64 = lambda_ur.iter().zip(&omega_u).map(|(&l, &o)| l.min(o)).sum();
    let e_em = if embb_users == 0 { 0 } else { urllc_cells.saturating_sub(kept) / embb_users as u64 };
    SliceQuotas { omega, omega_u, e_ur, e_em }
}

/// Quotas for one frame given all users' arrivals.
pub fn quotas(arrivals: &[u64], grid: &RbGrid, config: &SystemConfig) -> SliceQuotas {
    let lambda_ur: Vec<u64> = config.urllc_user_ids().map(|u| arrivals[u]).collect();
    let window = if config.qos.enforce_urllc_window { urllc_window_ttis(config, grid) } else { 0 };
    let omega = urllc_capacity(grid, window);
    quotas_from(
        &lambda_ur,
        omega,
        grid.slice(Slice::Urllc).num_cells() as u64,
        config.system.embb_users,
        config.qos.urllc_overflow_divisor,
    )
}
