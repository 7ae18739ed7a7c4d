//! Two-timescale frame loop, DDQN training and greedy evaluation.

use crate::channel::{scenario_topology, ChannelGains, FrameTrace, GeneratedTraces, TracePhase, TraceSource};
use crate::config::{build_rb_grid, ArrivalCrediting, RbGrid, ServiceClass, Slice, SystemConfig};
use crate::ddqn::agent::greedy_choices;
use crate::ddqn::{
    assignment_from_choices, check_constraints, compute_reward, encode_state, select_joint_action, train_step,
    AgentPair, Experience, Observation, Violation,
};
use crate::flow_split::{estimate_flow_split, uniform_flow_split, FlowSplit, RateWindow};
use crate::power::{frame_feasibility, solve_power_tti, FeasibilityReport};
use crate::rates::{update_queue, utility, worst_urllc_latency, LatencyReport, QueueState, RbAssignment};
use crate::rng::{stream_rng, Stream};
use crate::slicing::{quotas, SliceQuotas};
use serde::{Deserialize, Serialize};

/// Splits `total` bits over RUs by cumulative rounding so the parts sum to
/// `total` exactly.
pub fn split_bits(total: u64, fractions: &[f64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(fractions.len());
    let mut acc = 0.0;
    let mut prev = 0u64;
    for (i, f) in fractions.iter().enumerate() {
        acc += f;
        let cum = if i + 1 == fractions.len() { total } else { ((total as f64) * acc).round().min(total as f64) as u64 };
        let cum = cum.max(prev);
        out.push(cum - prev);
        prev = cum;
    }
    out
}

/// Bits credited to each sub-flow in TTI `j` of `n` when spreading `total`.
fn spread_share(total: u64, j: usize, n: usize) -> u64 {
    let at = |k: usize| (total as u128 * k as u128 / n as u128) as u64;
    at(j + 1) - at(j)
}

/// Bit accounting over an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitLedger {
    pub arrived: u64,
    pub served: u64,
    pub dropped: u64,
}

/// Mutable simulation state carried between frames of one episode.
#[derive(Debug, Clone)]
pub struct World {
    pub config: SystemConfig,
    pub grid: RbGrid,
    pub queues: QueueState,
    pub window: RateWindow,
    pub prev_gains: Option<ChannelGains>,
    pub ledger: BitLedger,
}

impl World {
    pub fn new(config: &SystemConfig) -> Self {
        let grid = build_rb_grid(config);
        let (m, u) = (config.system.num_rus, config.num_users());
        Self {
            config: config.clone(),
            grid,
            queues: QueueState::zeros(m, u),
            window: RateWindow::new(config.learning.window, m, u),
            prev_gains: None,
            ledger: BitLedger::default(),
        }
    }

    pub fn reset(&mut self) {
        *self = World::new(&self.config);
    }

    pub fn flow_split(&self, mode: PhiMode) -> FlowSplit {
        match mode {
            PhiMode::Estimated => estimate_flow_split(&self.window),
            PhiMode::Uniform => uniform_flow_split(self.config.system.num_rus, self.config.num_users()),
        }
    }

    pub fn quotas(&self, trace: &FrameTrace) -> SliceQuotas {
        quotas(&trace.arrivals.packets, &self.grid, &self.config)
    }

    pub fn observe(&self, trace: &FrameTrace, phi: &FlowSplit, q: &SliceQuotas) -> [Vec<f64>; 2] {
        let obs = Observation {
            arrivals: &trace.arrivals.packets,
            phi,
            queues_prev: &self.queues,
            gains_prev: self.prev_gains.as_ref(),
            quotas: q,
        };
        Slice::ALL.map(|s| encode_state(s, &obs, &self.config, &self.grid))
    }

    /// `arrived == served + dropped + backlog` must always hold.
    pub fn conserves_bits(&self) -> bool {
        self.ledger.arrived == self.ledger.served + self.ledger.dropped + self.queues.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    Estimated,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub quotas: SliceQuotas,
    /// Bits credited per `(ru, user)` this frame, before any tail drop.
    pub credited_bits: Vec<u64>,
    pub dropped_bits: u64,
    pub served_bits: Vec<u64>,
    pub embb_served_bits: u64,
    pub embb_throughput_bps: f64,
    pub latency: LatencyReport,
    /// Worst latency among scheduled uRLLC users, 0 when none is scheduled.
    pub worst_latency_s: f64,
    pub violations: Vec<Violation>,
    /// `(tick, ru)` pairs whose uRLLC minimum powers overran the budget.
    pub power_overruns: Vec<(usize, usize)>,
    pub feasibility: FeasibilityReport,
    pub penalties: usize,
    pub reward: f64,
    /// Mean over ticks of the total eMBB backlog.
    pub avg_queue_bits: f64,
    pub utility: f64,
    pub queues_end: QueueState,
    pub max_kkt_residual: f64,
}

impl FrameOutcome {
    pub fn feasible(&self) -> bool {
        self.penalties == 0
    }
}

/// Bits of each user's new arrivals headed to each RU, indexed `[user][ru]`.
pub fn arrival_split(config: &SystemConfig, phi: &FlowSplit, arrivals: &[u64]) -> Vec<Vec<u64>> {
    (0..config.num_users())
        .map(|u| {
            let col: Vec<f64> = (0..config.system.num_rus).map(|m| phi.get(m, u)).collect();
            split_bits(arrivals[u] * config.packet_size_bits(config.user_class(u)), &col)
        })
        .collect()
}

/// Bits credited to each `(ru, user)` at `tick`, before any tail drop.
pub fn credit_at(config: &SystemConfig, grid: &RbGrid, tick: usize, totals: &[Vec<u64>]) -> Vec<u64> {
    let (nm, nu) = (config.system.num_rus, config.num_users());
    let mut now = vec![0u64; nm * nu];
    for user in 0..nu {
        let s = match config.user_class(user) {
            ServiceClass::Embb => Slice::Embb,
            ServiceClass::Urllc => Slice::Urllc,
        };
        for ru in 0..nm {
            let total = totals[user][ru];
            now[ru * nu + user] = match config.traffic.arrival_crediting {
                ArrivalCrediting::FrameStart if tick == 0 => total,
                ArrivalCrediting::FrameStart => 0,
                ArrivalCrediting::PerTti if grid.is_tti_start(s, tick) => {
                    spread_share(total, grid.tti_at_tick(s, tick), grid.slice(s).num_ttis)
                }
                ArrivalCrediting::PerTti => 0,
            };
        }
    }
    now
}

fn credit(world: &mut World, tick: usize, totals: &[Vec<u64>], credited: &mut [u64]) -> u64 {
    let cfg = &world.config;
    let (nm, nu) = (cfg.system.num_rus, cfg.num_users());
    let now = credit_at(cfg, &world.grid, tick, totals);
    let mut dropped = 0;
    for ru in 0..nm {
        let mut excess = if cfg.qos.drop_on_overflow {
            let after: u64 = world.queues.ru_total(ru) + (0..nu).map(|u| now[ru * nu + u]).sum::<u64>();
            after.saturating_sub(cfg.qos.queue_cap_bits as u64)
        } else {
            0
        };
        for user in (0..nu).rev() {
            let k = ru * nu + user;
            let d = excess.min(now[k]);
            excess -= d;
            dropped += d;
            credited[k] += now[k];
            let q = world.queues.get_mut(ru, user);
            *q += now[k] - d;
        }
    }
    world.ledger.arrived += now.iter().sum::<u64>();
    world.ledger.dropped += dropped;
    dropped
}

/// Runs one frame with read-only long-term decisions `phi` and `pi`;
/// powers are re-solved every fine tick on the current gains.
pub fn run_frame(world: &mut World, trace: &FrameTrace, phi: &FlowSplit, pi: &RbAssignment) -> FrameOutcome {
    let cfg = world.config.clone();
    let grid = world.grid.clone();
    let (nm, nu) = (cfg.system.num_rus, cfg.num_users());
    let q = world.quotas(trace);
    let arrivals = &trace.arrivals.packets;
    let violations = check_constraints(pi, &q, arrivals, &grid, &cfg);

    let totals = arrival_split(&cfg, phi, arrivals);

    let mut credited = vec![0u64; nm * nu];
    let mut served = vec![0u64; nm * nu];
    let mut dropped = 0;
    let mut overruns = Vec::new();
    let mut queue_area = 0.0;
    let mut kkt: f64 = 0.0;
    for tick in 0..grid.num_ticks {
        dropped += credit(world, tick, &totals, &mut credited);
        let out = solve_power_tti(pi, &trace.gains, &world.queues, tick, &grid, &cfg);
        overruns.extend(out.overrun_rus.iter().map(|&ru| (tick, ru)));
        kkt = kkt.max(out.kkt_residual);
        for (k, &s) in out.served_bits.iter().enumerate() {
            let qk = &mut world.queues.bits[k];
            *qk = update_queue(*qk, 0, s);
            served[k] += s;
        }
        queue_area += world.queues.class_total(&cfg, ServiceClass::Embb) as f64;
    }
    world.ledger.served += served.iter().sum::<u64>();

    let embb_served_bits: u64 = (0..nm)
        .flat_map(|m| cfg.embb_user_ids().map(move |u| m * nu + u))
        .map(|k| served[k])
        .sum();
    let has: Vec<bool> = arrivals.iter().map(|&a| a > 0).collect();
    let latency = worst_urllc_latency(pi, &grid, &cfg.latency, &cfg, &has);
    let worst_latency_s = latency.worst().unwrap_or(0.0);
    let feasibility = frame_feasibility(&served, &credited, &world.queues, cfg.qos.queue_cap_bits);
    let penalties =
        if violations.is_empty() { overruns.len() + feasibility.count() } else { violations.len() };
    let reward = compute_reward(embb_served_bits as f64, worst_latency_s, penalties, &cfg);
    let avg_queue_bits = queue_area / grid.num_ticks.max(1) as f64;
    let u = &cfg.utility;
    let utility = utility(&[avg_queue_bits], worst_latency_s, u.omega, u.ref_queue_bits, u.ref_latency_s);

    world.window.push(served.iter().map(|&b| b as f64 / cfg.system.frame_duration_s).collect());
    world.prev_gains = Some(trace.gains.clone());
    FrameOutcome {
        quotas: q,
        credited_bits: credited,
        dropped_bits: dropped,
        served_bits: served,
        embb_served_bits,
        embb_throughput_bps: embb_served_bits as f64 / cfg.system.frame_duration_s,
        latency,
        worst_latency_s,
        violations,
        power_overruns: overruns,
        feasibility,
        penalties,
        reward,
        avg_queue_bits,
        utility,
        queues_end: world.queues.clone(),
        max_kkt_residual: kkt,
    }
}

/// Everything a policy sees at frame start.
pub struct PolicyInput<'a> {
    pub world: &'a World,
    pub trace: &'a FrameTrace,
    pub phi: &'a FlowSplit,
    pub quotas: &'a SliceQuotas,
    pub states: &'a [Vec<f64>; 2],
}

pub trait AssignmentPolicy {
    fn assign(&mut self, input: &PolicyInput) -> RbAssignment;
}

/// Greedy (epsilon = 0) use of trained agents.
pub struct GreedyAgents<'a>(pub &'a AgentPair);

impl AssignmentPolicy for GreedyAgents<'_> {
    fn assign(&mut self, input: &PolicyInput) -> RbAssignment {
        let choices = [0, 1].map(|i| {
            let a = &self.0.agents[i];
            greedy_choices(&a.q_values(&input.states[i]), a.spec.num_choices)
        });
        assignment_from_choices(&choices, &input.world.config, &input.world.grid)
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub agents: AgentPair,
    /// Mean frame reward per epoch.
    pub learning_curve: Vec<f64>,
}

/// Epoch loop: epsilon-greedy joint action, frame simulation, shared
/// reward, replay storage and one training step per agent and frame.
pub fn train(config: &SystemConfig, mode: PhiMode, seed: u64, epochs: usize) -> TrainResult {
    let mut world = World::new(config);
    let mut pair = AgentPair::new(config, &world.grid, seed);
    let topology = scenario_topology(config, seed);
    let frames = config.learning.frames_per_episode;
    let lc = &config.learning;
    let mut curve = Vec::with_capacity(epochs);
    for ep in 0..epochs {
        let traces = GeneratedTraces::new(config, topology.clone(), seed, TracePhase::Train(ep as u64));
        world.reset();
        let mut explore = stream_rng(seed, Stream::Exploration, ep as u64);
        let mut replay = stream_rng(seed, Stream::Replay, ep as u64);
        let mut trace = traces.frame(0);
        let mut phi = world.flow_split(mode);
        let mut q = world.quotas(&trace);
        let mut states = world.observe(&trace, &phi, &q);
        let mut total = 0.0;
        for t in 0..frames {
            let choices = select_joint_action(&pair.agents, &states, lc.exploration, &mut explore);
            let pi = assignment_from_choices(&choices, config, &world.grid);
            let out = run_frame(&mut world, &trace, &phi, &pi);
            total += out.reward;
            let terminal = t + 1 == frames;
            let next_states = if terminal {
                states.clone()
            } else {
                trace = traces.frame(t + 1);
                phi = world.flow_split(mode);
                q = world.quotas(&trace);
                world.observe(&trace, &phi, &q)
            };
            for i in 0..2 {
                pair.memories[i].store(Experience {
                    state: states[i].clone(),
                    action: choices[i].clone(),
                    reward: out.reward,
                    next_state: next_states[i].clone(),
                    terminal,
                });
                let _ = train_step(&mut pair.agents[i], &pair.memories[i], lc, &mut replay);
            }
            states = next_states;
        }
        curve.push(total / frames.max(1) as f64);
        pair.agents.iter_mut().for_each(|a| a.decay_epsilon(lc));
    }
    TrainResult { agents: pair, learning_curve: curve }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub frame: usize,
    pub scheme: String,
    pub seed: u64,
    pub p_max_dbm: f64,
    pub embb_throughput_bps: f64,
    pub worst_urllc_latency_s: f64,
    pub avg_queue_bits: f64,
    pub reward: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub records: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsAggregate {
    pub frames: usize,
    pub mean_throughput_bps: f64,
    pub std_throughput_bps: f64,
    pub mean_latency_s: f64,
    pub max_latency_s: f64,
    pub mean_queue_bits: f64,
    pub mean_reward: f64,
    pub feasible_fraction: f64,
}

impl MetricsSeries {
    pub fn extend(&mut self, other: MetricsSeries) {
        self.records.extend(other.records);
    }

    pub fn aggregate(&self) -> MetricsAggregate {
        let n = self.records.len().max(1) as f64;
        let mean = |f: fn(&MetricsRecord) -> f64| self.records.iter().map(f).sum::<f64>() / n;
        let mt = mean(|r| r.embb_throughput_bps);
        let var = self.records.iter().map(|r| (r.embb_throughput_bps - mt).powi(2)).sum::<f64>() / n;
        MetricsAggregate {
            frames: self.records.len(),
            mean_throughput_bps: mt,
            std_throughput_bps: var.sqrt(),
            mean_latency_s: mean(|r| r.worst_urllc_latency_s),
            max_latency_s: self.records.iter().map(|r| r.worst_urllc_latency_s).fold(0.0, f64::max),
            mean_queue_bits: mean(|r| r.avg_queue_bits),
            mean_reward: mean(|r| r.reward),
            feasible_fraction: mean(|r| r.feasible as u8 as f64),
        }
    }
}

/// Rolls a policy over `frames` frames of a trace source, recording one
/// metrics row per frame. `observer` sees every outcome.
pub fn rollout(
    config: &SystemConfig,
    mode: PhiMode,
    policy: &mut dyn AssignmentPolicy,
    traces: &dyn TraceSource,
    frames: usize,
    label: (&str, u64),
    observer: &mut dyn FnMut(usize, &FrameOutcome),
) -> MetricsSeries {
    let mut world = World::new(config);
    let mut series = MetricsSeries::default();
    for t in 0..frames {
        let trace = traces.frame(t);
        let phi = world.flow_split(mode);
        let q = world.quotas(&trace);
        let states = world.observe(&trace, &phi, &q);
        let pi = policy.assign(&PolicyInput { world: &world, trace: &trace, phi: &phi, quotas: &q, states: &states });
        let out = run_frame(&mut world, &trace, &phi, &pi);
        observer(t, &out);
        series.records.push(MetricsRecord {
            frame: t,
            scheme: label.0.to_string(),
            seed: label.1,
            p_max_dbm: config.system.max_power_dbm,
            embb_throughput_bps: out.embb_throughput_bps,
            worst_urllc_latency_s: out.worst_latency_s,
            avg_queue_bits: out.avg_queue_bits,
            reward: out.reward,
            feasible: out.feasible(),
        });
    }
    series
}

/// Greedy evaluation of trained agents on the evaluation traces of `seed`.
pub fn evaluate(
    config: &SystemConfig,
    mode: PhiMode,
    agents: &AgentPair,
    seed: u64,
    frames: usize,
    scheme: &str,
) -> MetricsSeries {
    let traces = GeneratedTraces::new(config, scenario_topology(config, seed), seed, TracePhase::Eval);
    rollout(config, mode, &mut GreedyAgents(agents), &traces, frames, (scheme, seed), &mut |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TrafficArrivals;

    struct Fixed(RbAssignment);
    impl AssignmentPolicy for Fixed {
        fn assign(&mut self, _: &PolicyInput) -> RbAssignment {
            self.0.clone()
        }
    }

    #[test]
    fn split_bits_sums_exactly() {
        assert_eq!(split_bits(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(split_bits(7, &[1.0 / 3.0; 3]).iter().sum::<u64>(), 7);
        assert_eq!(split_bits(400, &[1.0]), vec![400]);
        assert_eq!(split_bits(0, &[0.2, 0.8]), vec![0, 0]);
        assert_eq!((0..4).map(|j| spread_share(10, j, 4)).sum::<u64>(), 10);
    }

    fn tiny_trace(c: &SystemConfig, g: &RbGrid, packets: Vec<u64>) -> FrameTrace {
        FrameTrace {
            gains: ChannelGains::filled(c.system.num_rus, c.num_users(), g, 1e-9),
            arrivals: TrafficArrivals { packets },
        }
    }

    #[test]
    fn idle_frame_is_zero() {
        let c = SystemConfig::desk();
        let mut w = World::new(&c);
        let trace = tiny_trace(&c, &w.grid.clone(), vec![0; 4]);
        let phi = w.flow_split(PhiMode::Uniform);
        let pi = RbAssignment::empty(2, 4, &w.grid);
        let out = run_frame(&mut w, &trace, &phi, &pi);
        assert_eq!(out.embb_served_bits, 0);
        assert_eq!(out.served_bits.iter().sum::<u64>(), 0);
        assert_eq!(out.worst_latency_s, 0.0);
        assert_eq!(out.avg_queue_bits, 0.0);
        assert!(w.conserves_bits());
    }

    #[test]
    fn single_packet_drains_in_first_tti() {
        let mut c = SystemConfig::desk();
        c.system.num_rus = 1;
        c.system.embb_users = 1;
        c.system.urllc_users = 0;
        let mut w = World::new(&c);
        let g = w.grid.clone();
        let trace = tiny_trace(&c, &g, vec![1]);
        let mut pi = RbAssignment::empty(1, 1, &g);
        pi.set(Slice::Embb, 0, 0, 0, 0, true);
        let phi = w.flow_split(PhiMode::Uniform);
        let out = run_frame(&mut w, &trace, &phi, &pi);
        assert_eq!(out.served_bits, vec![400]);
        assert_eq!(w.queues.total(), 0);
        assert!(w.conserves_bits());
    }

    #[test]
    fn conservation_with_tail_drop() {
        let mut c = SystemConfig::desk();
        c.qos.drop_on_overflow = true;
        c.qos.queue_cap_bits = 500.0;
        c.traffic.arrival_crediting = ArrivalCrediting::PerTti;
        let traces = GeneratedTraces::new(&c, scenario_topology(&c, 4), 4, TracePhase::Eval);
        let mut w = World::new(&c);
        let pi = RbAssignment::empty(2, 4, &w.grid);
        let mut dropped = 0;
        for t in 0..5 {
            let phi = w.flow_split(PhiMode::Estimated);
            dropped += run_frame(&mut w, &traces.frame(t), &phi, &pi).dropped_bits;
            assert!(w.conserves_bits());
            assert!((0..2).all(|m| w.queues.ru_total(m) <= 500));
        }
        assert!(dropped > 0);
    }

    #[test]
    fn training_is_deterministic_and_zero_epochs_is_init() {
        let mut c = SystemConfig::desk();
        c.learning.frames_per_episode = 4;
        c.learning.batch_size = 4;
        c.learning.hidden_units = 8;
        let a = train(&c, PhiMode::Estimated, 3, 2);
        let b = train(&c, PhiMode::Estimated, 3, 2);
        assert_eq!(a.learning_curve, b.learning_curve);
        assert_eq!(a.agents, b.agents);
        let z = train(&c, PhiMode::Estimated, 3, 0);
        let init = AgentPair::new(&c, &World::new(&c).grid, 3);
        assert_eq!(z.agents, init);
        assert!(z.learning_curve.is_empty());
    }

    #[test]
    fn single_frame_aggregate_matches_record() {
        let c = SystemConfig::desk();
        let traces = GeneratedTraces::new(&c, scenario_topology(&c, 1), 1, TracePhase::Eval);
        let mut pol = Fixed(RbAssignment::empty(2, 4, &World::new(&c).grid));
        let s = rollout(&c, PhiMode::Estimated, &mut pol, &traces, 1, ("x", 1), &mut |_, _| {});
        let a = s.aggregate();
        assert_eq!(a.frames, 1);
        assert_eq!(a.mean_throughput_bps, s.records[0].embb_throughput_bps);
        assert_eq!(a.mean_reward, s.records[0].reward);
    }
}
