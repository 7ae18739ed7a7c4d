//! Observation vectors and the mapping between head choices and RB
//! assignments.

use super::agent::AgentSpec;
use crate::channel::ChannelGains;
use crate::config::{RbGrid, ServiceClass, Slice, SystemConfig};
use crate::flow_split::FlowSplit;
use crate::rates::{QueueState, RbAssignment};
use crate::slicing::SliceQuotas;

/// Frame-start data visible to the agents.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub arrivals: &'a [u64],
    pub phi: &'a FlowSplit,
    pub queues_prev: &'a QueueState,
    /// Gains of the previous frame, absent in the first frame.
    pub gains_prev: Option<&'a ChannelGains>,
    pub quotas: &'a SliceQuotas,
}

/// Users a slice's heads may pick: every user in the uRLLC slice; eMBB users
/// in the eMBB slice, joined by uRLLC users only when the slice's first TTI
/// already meets the latency budget.
pub fn serviceable_users(slice: Slice, config: &SystemConfig, grid: &RbGrid) -> Vec<usize> {
    match slice {
        Slice::Urllc => (0..config.num_users()).collect(),
        Slice::Embb => {
            let first_tti = config.latency.total() + grid.slice(Slice::Embb).tti_duration_s;
            let urllc_fits = first_tti <= config.qos.latency_budget_s;
            config.embb_user_ids().chain(config.urllc_user_ids().filter(|_| urllc_fits)).collect()
        }
    }
}

/// Choice 0 leaves the RB idle; choice `1 + ru * users.len() + k` gives it to
/// `(ru, users[k])`.
pub fn num_choices(num_rus: usize, users: &[usize]) -> usize {
    1 + num_rus * users.len()
}

pub fn encode_choice(ru: usize, user: usize, users: &[usize]) -> Option<usize> {
    users.iter().position(|&u| u == user).map(|k| 1 + ru * users.len() + k)
}

pub fn decode_choice(c: usize, users: &[usize]) -> Option<(usize, usize)> {
    (c > 0).then(|| ((c - 1) / users.len(), users[(c - 1) % users.len()]))
}

/// Head `h` covers RB `h % F` in TTI `h / F`.
pub fn head_cell(h: usize, num_rbs: usize) -> (usize, usize) {
    (h % num_rbs, h / num_rbs)
}

fn quota_len(slice: Slice, config: &SystemConfig) -> usize {
    match slice {
        Slice::Embb => config.system.urllc_users,
        Slice::Urllc => config.system.embb_users,
    }
}

pub fn agent_spec(slice: Slice, config: &SystemConfig, grid: &RbGrid) -> AgentSpec {
    let (m, u) = (config.system.num_rus, config.num_users());
    let sg = grid.slice(slice);
    AgentSpec {
        state_dim: u + 2 * m * u + m * u * sg.num_rbs + quota_len(slice, config),
        num_heads: sg.num_cells(),
        num_choices: num_choices(m, &serviceable_users(slice, config, grid)),
    }
}

/// Observation of the agent that owns `slice`: the eMBB-slice agent sees the
/// uRLLC overflow quotas and the uRLLC-slice agent the eMBB quotas.
pub fn encode_state(slice: Slice, obs: &Observation, config: &SystemConfig, grid: &RbGrid) -> Vec<f64> {
    let (m, u) = (config.system.num_rus, config.num_users());
    let sg = grid.slice(slice);
    let mut s = Vec::with_capacity(agent_spec(slice, config, grid).state_dim);
    s.extend(obs.arrivals.iter().enumerate().map(|(u, &l)| {
        let norm = match config.user_class(u) {
            ServiceClass::Embb => config.learning.arrival_norm,
            ServiceClass::Urllc => config.learning.arrival_norm_urllc,
        };
        l as f64 / norm
    }));
    s.extend(obs.phi.phi.iter());
    s.extend(obs.queues_prev.bits.iter().map(|&q| q as f64 / config.qos.queue_cap_bits));
    let (lo, hi) = (config.channel.gain_log10_min, config.channel.gain_log10_max);
    for ru in 0..m {
        for user in 0..u {
            for rb in 0..sg.num_rbs {
                s.push(match obs.gains_prev {
                    Some(g) => {
                        let x = g.rb_mean(slice, ru, user, rb).log10();
                        (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                    }
                    None => 0.0,
                });
            }
        }
    }
    match slice {
        Slice::Embb => {
            let cells = grid.slice(Slice::Embb).num_cells().max(1) as f64;
            s.extend(obs.quotas.e_ur.iter().map(|&e| e as f64 / cells));
        }
        Slice::Urllc => {
            let cells = grid.slice(Slice::Urllc).num_cells().max(1) as f64;
            s.extend(std::iter::repeat_n(obs.quotas.e_em as f64 / cells, config.system.embb_users));
        }
    }
    s
}

/// Writes one agent's head choices into its slice of `pi`.
pub fn decode_action(slice: Slice, choices: &[usize], pi: &mut RbAssignment, config: &SystemConfig, grid: &RbGrid) {
    let nf = grid.slice(slice).num_rbs;
    let users = serviceable_users(slice, config, grid);
    for (h, &c) in choices.iter().enumerate() {
        let (rb, tti) = head_cell(h, nf);
        if let Some((ru, user)) = decode_choice(c, &users) {
            pi.set(slice, ru, user, rb, tti, true);
        }
    }
}

/// Builds the full assignment from both agents' choices.
pub fn assignment_from_choices(
    choices: &[Vec<usize>; 2],
    config: &SystemConfig,
    grid: &RbGrid,
) -> RbAssignment {
    let mut pi = RbAssignment::empty(config.system.num_rus, config.num_users(), grid);
    for s in Slice::ALL {
        decode_action(s, &choices[s.index()], &mut pi, config, grid);
    }
    pi
}

/// Inverse of `decode_action` for assignments with at most one holder per
/// RB; holders the slice cannot serve read back as idle.
pub fn choices_from_assignment(slice: Slice, pi: &RbAssignment, config: &SystemConfig, grid: &RbGrid) -> Vec<usize> {
    let sg = grid.slice(slice);
    let users = serviceable_users(slice, config, grid);
    (0..sg.num_cells())
        .map(|h| {
            let (rb, tti) = head_cell(h, sg.num_rbs);
            pi.owner(slice, rb, tti).and_then(|(ru, user)| encode_choice(ru, user, &users)).unwrap_or(0)
        })
        .collect()
}
