//! Rule-based RB assignment used as a reference policy.

use crate::channel::ChannelGains;
use crate::config::{overflow_window_ttis, RbGrid, ServiceClass, Slice, SystemConfig};
use crate::ddqn::encoding::head_cell;
use crate::flow_split::FlowSplit;
use crate::rates::{QueueState, RbAssignment};
use crate::sim::{AssignmentPolicy, PolicyInput};
use crate::slicing::SliceQuotas;

/// What the rule-based scheduler looks at.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicInput<'a> {
    pub quotas: &'a SliceQuotas,
    pub arrivals: &'a [u64],
    pub phi: &'a FlowSplit,
    pub queues: &'a QueueState,
    pub gains: &'a ChannelGains,
}

/// Rule-based assignment. Each sub-flow's demand is its backlog plus its
/// share of the new arrivals; every cell goes to the eligible sub-flow with
/// the largest remaining demand, which is then charged the cell's estimated
/// bits at an equal power split, or one packet for uRLLC. uRLLC users take the earliest uRLLC-slice
/// cells, eMBB users then fill their uRLLC-slice quotas, and the eMBB slice
/// serves the eMBB sub-flows.
pub fn heuristic_assignment(config: &SystemConfig, grid: &RbGrid, input: &HeuristicInput) -> RbAssignment {
    let (nm, nu) = (config.system.num_rus, config.num_users());
    let mut pi = RbAssignment::empty(nm, nu, grid);
    let mut demand: Vec<f64> = (0..nm * nu)
        .map(|k| {
            let (ru, user) = (k / nu, k % nu);
            let z = config.packet_size_bits(config.user_class(user)) as f64;
            input.queues.bits[k] as f64 + input.phi.get(ru, user) * input.arrivals[user] as f64 * z
        })
        .collect();
    let active_rbs = (grid.slice(Slice::Embb).num_rbs + grid.slice(Slice::Urllc).num_rbs).max(1) as f64;
    let p_rb = config.max_power_w() / active_rbs;
    let n0 = config.noise_power_w();
    let cell_bits = |s: Slice, ru: usize, user: usize, rb: usize| {
        let sg = grid.slice(s);
        match config.user_class(user) {
            ServiceClass::Urllc => config.traffic.packet_size_urllc_bits as f64,
            ServiceClass::Embb => {
                let g = input.gains.rb_mean(s, ru, user, rb);
                sg.rb_bandwidth_hz * sg.tti_duration_s * (1.0 + g * p_rb / n0).log2()
            }
        }
    };
    let give = |s: Slice, h: usize, users: &[usize], pi: &mut RbAssignment, demand: &mut [f64]| {
        let (rb, tti) = head_cell(h, grid.slice(s).num_rbs);
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for ru in 0..nm {
            for &user in users {
                let key = (demand[ru * nu + user], cell_bits(s, ru, user, rb));
                if best.is_none_or(|b| key.0 > b.0 || (key.0 == b.0 && key.1 > b.1)) {
                    best = Some((key.0, key.1, ru, user));
                }
            }
        }
        if let Some((_, bits, ru, user)) = best {
            demand[ru * nu + user] -= bits;
            pi.set(s, ru, user, rb, tti, true);
        }
    };

    let s2 = grid.slice(Slice::Urllc);
    let mut next = 0;
    for (k, user) in config.urllc_user_ids().enumerate() {
        let stop = (next + input.quotas.omega_u[k].min(input.arrivals[user]) as usize).min(s2.num_cells());
        while next < stop {
            give(Slice::Urllc, next, &[user], &mut pi, &mut demand);
            next += 1;
        }
    }
    for _ in 0..input.quotas.e_em {
        for user in config.embb_user_ids() {
            if next < s2.num_cells() {
                give(Slice::Urllc, next, &[user], &mut pi, &mut demand);
                next += 1;
            }
        }
    }

    let s1 = grid.slice(Slice::Embb);
    let mut free: Vec<usize> = (0..s1.num_cells()).collect();
    let window = overflow_window_ttis(config, grid).min(s1.num_ttis);
    for (k, user) in config.urllc_user_ids().enumerate() {
        for _ in 0..input.quotas.e_ur[k] {
            if let Some(i) = free.iter().position(|&h| head_cell(h, s1.num_rbs).1 < window) {
                give(Slice::Embb, free.remove(i), &[user], &mut pi, &mut demand);
            }
        }
    }
    let embb: Vec<usize> = config.embb_user_ids().collect();
    for h in free {
        give(Slice::Embb, h, &embb, &mut pi, &mut demand);
    }
    pi
}

/// [`heuristic_assignment`] on the previous frame's gains, or on the current
/// ones in the first frame.
pub struct Heuristic;

impl AssignmentPolicy for Heuristic {
    fn assign(&mut self, input: &PolicyInput) -> RbAssignment {
        let w = input.world;
        let h = HeuristicInput {
            quotas: input.quotas,
            arrivals: &input.trace.arrivals.packets,
            phi: input.phi,
            queues: &w.queues,
            gains: w.prev_gains.as_ref().unwrap_or(&input.trace.gains),
        };
        heuristic_assignment(&w.config, &w.grid, &h)
    }
}
