//! Per-tick power allocation: minimum uRLLC packet powers followed by
//! backlog-capped water-filling over the eMBB RBs of each RU.

use crate::channel::ChannelGains;
use crate::config::{RbGrid, ServiceClass, Slice, SystemConfig};
use crate::rates::{fbl_penalty, QueueState, RbAssignment};
use std::f64::consts::LOG2_E;

/// Smallest power that carries `packet_bits` over one TTI of `tti_s` while
/// meeting the SNR floor.
pub fn min_power_for_packet(
    gain: f64,
    rb_bandwidth_hz: f64,
    tti_s: f64,
    packet_bits: f64,
    snr_floor: f64,
    noise_w: f64,
    psi: f64,
) -> f64 {
    let needed = (packet_bits / (rb_bandwidth_hz * tti_s) + LOG2_E * psi).exp2() - 1.0;
    noise_w / gain * snr_floor.max(needed)
}

/// One eMBB RB in a water-filling instance: served bits are
/// `weight * log2(1 + a * p)` and the RB belongs to backlog group `group`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillChannel {
    pub weight: f64,
    pub a: f64,
    pub group: usize,
}

impl FillChannel {
    pub fn bits(&self, p: f64) -> f64 {
        self.weight * (self.a * p).ln_1p() * LOG2_E
    }

    fn threshold(&self) -> f64 {
        1.0 / (self.a * self.weight)
    }

    fn power_at(&self, level: f64) -> f64 {
        (self.weight * level - 1.0 / self.a).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub powers: Vec<f64>,
    /// Common water level; infinite when every group hits its cap first.
    pub level: f64,
    /// Saturation level per group (infinite for uncapped groups).
    pub group_levels: Vec<f64>,
    pub kkt_residual: f64,
}

/// Level at which a group's served bits equal `cap`.
fn group_level(channels: &[&FillChannel], cap: f64) -> f64 {
    if !cap.is_finite() {
        return f64::INFINITY;
    }
    let mut ch: Vec<&FillChannel> = channels.to_vec();
    ch.sort_by(|x, y| x.threshold().total_cmp(&y.threshold()));
    if ch.is_empty() {
        return f64::INFINITY;
    }
    if cap <= 0.0 {
        return ch[0].threshold();
    }
    let (mut sw, mut swl) = (0.0, 0.0);
    for j in 0..ch.len() {
        sw += ch[j].weight;
        swl += ch[j].weight * (ch[j].a * ch[j].weight).log2();
        let lvl = ((cap - swl) / sw).exp2();
        let upper = ch.get(j + 1).map_or(f64::INFINITY, |c| c.threshold());
        if lvl <= upper {
            return lvl.max(ch[j].threshold());
        }
    }
    unreachable!("last segment is unbounded")
}

/// Maximises `sum_g min(cap_g, sum_{k in g} bits_k(p_k))` subject to
/// `sum p <= budget`, `p >= 0`. Exact: the level is found on sorted
/// breakpoints of the piecewise-linear total power.
pub fn capped_water_filling(channels: &[FillChannel], caps: &[f64], budget: f64) -> WaterFill {
    let group_levels: Vec<f64> = (0..caps.len())
        .map(|g| {
            let members: Vec<&FillChannel> = channels.iter().filter(|c| c.group == g).collect();
            group_level(&members, caps[g])
        })
        .collect();
    let eff = |c: &FillChannel, l: f64| l.min(group_levels[c.group]);
    let total_at = |l: f64| channels.iter().map(|c| c.power_at(eff(c, l))).sum::<f64>();

    let mut breaks: Vec<f64> = channels
        .iter()
        .map(|c| c.threshold())
        .chain(group_levels.iter().copied().filter(|l| l.is_finite()))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let level = if channels.is_empty() || budget <= 0.0 {
        breaks.first().copied().unwrap_or(0.0)
    } else {
        let all_capped = group_levels.iter().all(|l| l.is_finite());
        let top = breaks.last().copied().unwrap_or(0.0);
        if all_capped && total_at(top) <= budget {
            f64::INFINITY
        } else {
            // First breakpoint with total power >= budget bounds the segment.
            let hi_idx = breaks.iter().position(|&b| total_at(b) >= budget);
            let lo = match hi_idx {
                Some(0) => breaks[0],
                Some(i) => breaks[i - 1],
                None => top,
            };
            // On (lo, hi) the total is sum_active(w*l - 1/a) + capped constant.
            let probe = match hi_idx {
                Some(i) if i > 0 => 0.5 * (lo + breaks[i]),
                _ => lo * 2.0 + 1.0,
            };
            let (mut slope, mut konst) = (0.0, 0.0);
            for c in channels {
                let gl = group_levels[c.group];
                if probe < gl {
                    if probe > c.threshold() {
                        slope += c.weight;
                        konst -= 1.0 / c.a;
                    }
                } else {
                    konst += c.power_at(gl);
                }
            }
            if slope > 0.0 {
                (budget - konst) / slope
            } else {
                lo
            }
        }
    };

    let mut powers: Vec<f64> = channels.iter().map(|c| c.power_at(eff(c, level))).collect();
    enforce_budget(&mut powers, budget.max(0.0));
    let kkt_residual = kkt_residual(channels, caps, &powers, budget, level, &group_levels);
    WaterFill { powers, level, group_levels, kkt_residual }
}

/// Makes `sum p <= budget` hold in floating point exactly.
fn enforce_budget(powers: &mut [f64], budget: f64) {
    let sum: f64 = powers.iter().sum();
    if sum <= budget {
        return;
    }
    let s = budget / sum;
    powers.iter_mut().for_each(|p| *p *= s);
    while powers.iter().sum::<f64>() > budget {
        let (i, _) = powers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty when over budget");
        let over = powers.iter().sum::<f64>() - budget;
        powers[i] = (powers[i] - over.max(powers[i] * f64::EPSILON)).max(0.0);
    }
}

/// Largest relative violation of the capped water-filling optimality
/// conditions.
fn kkt_residual(
    channels: &[FillChannel],
    caps: &[f64],
    powers: &[f64],
    budget: f64,
    level: f64,
    group_levels: &[f64],
) -> f64 {
    let mut r: f64 = 0.0;
    for (c, &p) in channels.iter().zip(powers) {
        // Marginal power cost per unit level: w / (p + 1/a) compared with 1/L.
        let gl = group_levels[c.group];
        let lvl = level.min(gl);
        if !lvl.is_finite() {
            continue;
        }
        if p > 0.0 {
            let ratio = c.weight * lvl / (p + 1.0 / c.a);
            r = r.max((ratio - 1.0).abs());
        } else if gl > level {
            r = r.max((c.weight * c.a * level - 1.0).max(0.0));
        }
    }
    if level.is_finite() && budget > 0.0 && !channels.is_empty() {
        let used: f64 = powers.iter().sum();
        r = r.max((budget - used).abs() / budget);
    }
    for (g, &cap) in caps.iter().enumerate() {
        if group_levels[g] <= level && cap.is_finite() && cap > 0.0 {
            let bits: f64 = channels.iter().zip(powers).filter(|(c, _)| c.group == g).map(|(c, p)| c.bits(*p)).sum();
            r = r.max((bits - cap).abs() / cap);
        }
    }
    r
}

/// Power assigned to one held RB during a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbPower {
    pub slice: Slice,
    pub rb: usize,
    pub ru: usize,
    pub user: usize,
    pub power_w: f64,
    /// Bits this RB can carry during the tick at `power_w`.
    pub capacity_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolveOutcome {
    pub allocation: Vec<RbPower>,
    /// Served bits per `(ru, user)` this tick, capped by backlog.
    pub served_bits: Vec<u64>,
    pub feasible: bool,
    /// RUs whose uRLLC minimum powers exceed the budget.
    pub overrun_rus: Vec<usize>,
    pub kkt_residual: f64,
}

impl PowerSolveOutcome {
    pub fn ru_power(&self, ru: usize) -> f64 {
        self.allocation.iter().filter(|a| a.ru == ru).map(|a| a.power_w).sum()
    }
}

/// Per-slice finite-blocklength back-off.
pub fn slice_penalties(config: &SystemConfig, grid: &RbGrid) -> [f64; 2] {
    Slice::ALL.map(|s| {
        let g = grid.slice(s);
        fbl_penalty(config.qos.error_prob, g.tti_duration_s, g.rb_bandwidth_hz)
            .expect("validated error probability")
    })
}

/// Bits a served RB carries during one tick.
pub fn rb_tick_bits(class: ServiceClass, rb_bandwidth_hz: f64, tick_s: f64, snr: f64, psi: f64) -> f64 {
    let per_hz = match class {
        ServiceClass::Embb => snr.ln_1p() * LOG2_E,
        ServiceClass::Urllc => (snr.ln_1p() * LOG2_E - LOG2_E * psi).max(0.0),
    };
    rb_bandwidth_hz * tick_s * per_hz
}

/// Converts summed capacity into whole served bits, capped by the backlog.
pub fn served_from_capacity(capacity_bits: f64, backlog: u64) -> u64 {
    let whole = (capacity_bits + 1e-6).floor().max(0.0);
    if whole >= backlog as f64 {
        backlog
    } else {
        whole as u64
    }
}

/// Solves one fine tick. `queues` is the backlog at the start of the tick.
/// Assigned uRLLC RBs transmit only while their sub-flow has backlog;
/// unassigned RBs get no power.
pub fn solve_power_tti(
    pi: &RbAssignment,
    gains: &ChannelGains,
    queues: &QueueState,
    tick: usize,
    grid: &RbGrid,
    config: &SystemConfig,
) -> PowerSolveOutcome {
    let budget = config.max_power_w();
    let noise = config.noise_power_w();
    let psi = slice_penalties(config, grid);
    let nu = pi.num_users;
    let mut allocation = Vec::new();
    let mut overrun_rus = Vec::new();
    let mut kkt: f64 = 0.0;

    for ru in 0..pi.num_rus {
        let mut urllc = Vec::new();
        let mut embb = Vec::new();
        for s in Slice::ALL {
            let sg = grid.slice(s);
            let tti = grid.tti_at_tick(s, tick);
            for rb in 0..sg.num_rbs {
                for user in 0..nu {
                    if !pi.get(s, ru, user, rb, tti) || queues.get(ru, user) == 0 {
                        continue;
                    }
                    let g = gains.get(s, ru, user, rb, tti);
                    match config.user_class(user) {
                        ServiceClass::Urllc => {
                            let p = min_power_for_packet(
                                g,
                                sg.rb_bandwidth_hz,
                                sg.tti_duration_s,
                                config.traffic.packet_size_urllc_bits as f64,
                                config.qos.urllc_snr_floor,
                                noise,
                                psi[s.index()],
                            );
                            urllc.push((s, rb, user, g, p));
                        }
                        ServiceClass::Embb => embb.push((s, rb, user, g)),
                    }
                }
            }
        }

        let need: f64 = urllc.iter().map(|x| x.4).sum();
        let scale = if need > budget {
            overrun_rus.push(ru);
            budget / need
        } else {
            1.0
        };
        let mut used = 0.0;
        for &(s, rb, user, g, p) in &urllc {
            let power_w = (p * scale).min(budget - used).max(0.0);
            used += power_w;
            let cap = rb_tick_bits(
                ServiceClass::Urllc,
                grid.slice(s).rb_bandwidth_hz,
                grid.tick_s,
                power_w * g / noise,
                psi[s.index()],
            );
            allocation.push(RbPower { slice: s, rb, ru, user, power_w, capacity_bits: cap });
        }

        let residual = if need > budget { 0.0 } else { (budget - used).max(0.0) };
        let users: Vec<usize> = {
            let mut v: Vec<usize> = embb.iter().map(|e| e.2).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let channels: Vec<FillChannel> = embb
            .iter()
            .map(|&(s, _, user, g)| FillChannel {
                weight: grid.slice(s).rb_bandwidth_hz * grid.tick_s,
                a: g / noise,
                group: users.binary_search(&user).expect("collected above"),
            })
            .collect();
        let caps: Vec<f64> = users.iter().map(|&u| queues.get(ru, u) as f64).collect();
        let wf = capped_water_filling(&channels, &caps, residual);
        kkt = kkt.max(wf.kkt_residual);
        for (&(s, rb, user, _), (c, &p)) in embb.iter().zip(channels.iter().zip(&wf.powers)) {
            allocation.push(RbPower { slice: s, rb, ru, user, power_w: p, capacity_bits: c.bits(p) });
        }
    }

    let mut capacity = vec![0.0; pi.num_rus * nu];
    for a in &allocation {
        capacity[a.ru * nu + a.user] += a.capacity_bits;
    }
    let served_bits = capacity
        .iter()
        .zip(&queues.bits)
        .map(|(&c, &q)| served_from_capacity(c, q))
        .collect();
    PowerSolveOutcome {
        allocation,
        served_bits,
        feasible: overrun_rus.is_empty(),
        overrun_rus,
        kkt_residual: kkt,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    /// `(ru, user, demand_bits, served_bits)` for sub-flows served short.
    pub shortfalls: Vec<(usize, usize, u64, u64)>,
    /// `(ru, backlog_bits)` for RUs whose end-of-frame backlog exceeds the cap.
    pub queue_overflows: Vec<(usize, u64)>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.shortfalls.is_empty() && self.queue_overflows.is_empty()
    }

    pub fn count(&self) -> usize {
        self.shortfalls.len() + self.queue_overflows.len()
    }
}

/// Frame-end check: each sub-flow must have been served at least the bits
/// credited to it this frame, and each RU's backlog must stay within the cap.
pub fn frame_feasibility(
    served: &[u64],
    demand: &[u64],
    queues_end: &QueueState,
    queue_cap_bits: f64,
) -> FeasibilityReport {
    let nu = queues_end.num_users;
    let mut rep = FeasibilityReport::default();
    for (k, (&d, &s)) in demand.iter().zip(served).enumerate() {
        if s < d {
            rep.shortfalls.push((k / nu, k % nu, d, s));
        }
    }
    for ru in 0..queues_end.num_rus {
        let total = queues_end.ru_total(ru);
        if total as f64 > queue_cap_bits {
            rep.queue_overflows.push((ru, total));
        }
    }
    rep
}
