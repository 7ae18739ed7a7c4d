//! Comparison schemes: uniform flow split, single numerology, a relaxed
//! lower bound on the frame objective and exhaustive search on tiny grids.

pub mod brute_force;
pub mod heuristic;
pub mod oracle;
pub mod relaxed;

pub use brute_force::{brute_force_optimum, score_assignment, search_space_size, BruteForceOptimum, SearchSpaceTooLarge};
pub use heuristic::{heuristic_assignment, Heuristic, HeuristicInput};
pub use oracle::{compare_on, instance_trace, tiny_instance, OracleComparison};
pub use relaxed::{relaxed_frame_bound, RelaxedInput, RelaxedSolution};

use crate::channel::{scenario_topology, GeneratedTraces, TracePhase, TraceSource};
use crate::config::{build_rb_grid, NumerologyConfig, SystemConfig};
use crate::ddqn::compute_reward;
use crate::flow_split::{estimate_flow_split, RateWindow};
use crate::sim::{evaluate, train, MetricsRecord, MetricsSeries, PhiMode};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Proposed,
    UniformPhi,
    FixedNumerology,
    RelaxedUpperBound,
    BruteForce,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::Proposed,
        SchemeId::UniformPhi,
        SchemeId::FixedNumerology,
        SchemeId::RelaxedUpperBound,
        SchemeId::BruteForce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::UniformPhi => "uniform_phi",
            SchemeId::FixedNumerology => "fixed_numerology",
            SchemeId::RelaxedUpperBound => "relaxed_upper_bound",
            SchemeId::BruteForce => "brute_force",
        }
    }

    /// Schemes that train agents before evaluation.
    pub fn is_learned(self) -> bool {
        matches!(self, SchemeId::Proposed | SchemeId::UniformPhi | SchemeId::FixedNumerology)
    }

    pub fn phi_mode(self) -> PhiMode {
        match self {
            SchemeId::UniformPhi => PhiMode::Uniform,
            _ => PhiMode::Estimated,
        }
    }

    /// The config the scheme actually runs on.
    pub fn config(self, base: &SystemConfig) -> SystemConfig {
        match self {
            SchemeId::FixedNumerology => base.with_fixed_numerology(),
            _ => base.clone(),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScheme(pub String);

impl fmt::Display for UnknownScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = SchemeId::ALL.iter().map(|s| s.as_str()).collect();
        write!(f, "unknown scheme `{}`, expected one of {}", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownScheme {}

impl FromStr for SchemeId {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// Evaluation series of a learned scheme plus its training curve.
#[derive(Debug, Clone)]
pub struct LearnedRun {
    pub series: MetricsSeries,
    pub learning_curve: Vec<f64>,
    pub agents: crate::ddqn::AgentPair,
}

/// Trains the scheme's agents for `epochs` and evaluates them greedily for
/// `config.evaluation.frames` frames on the evaluation traces of `seed`.
pub fn run_learned(config: &SystemConfig, scheme: SchemeId, seed: u64, epochs: usize) -> LearnedRun {
    let cfg = scheme.config(config);
    let mode = scheme.phi_mode();
    let trained = train(&cfg, mode, seed, epochs);
    let series = evaluate(&cfg, mode, &trained.agents, seed, cfg.evaluation.frames, scheme.as_str());
    LearnedRun { series, learning_curve: trained.learning_curve, agents: trained.agents }
}

pub fn run_uniform_phi(config: &SystemConfig, seed: u64) -> MetricsSeries {
    run_learned(config, SchemeId::UniformPhi, seed, config.learning.epochs).series
}

pub fn run_fixed_numerology(config: &SystemConfig, seed: u64) -> MetricsSeries {
    run_learned(config, SchemeId::FixedNumerology, seed, config.learning.epochs).series
}

/// Per-frame relaxed bound on the evaluation traces of `seed`. The relaxed
/// queues carry over between frames and the flow split follows the relaxed
/// service rates. Queue and latency columns hold the certified lower bounds.
pub fn run_relaxed_upper_bound(config: &SystemConfig, seed: u64) -> MetricsSeries {
    let grid = build_rb_grid(config);
    let traces = GeneratedTraces::new(config, scenario_topology(config, seed), seed, TracePhase::Eval);
    let (nm, nu, ne) = (config.system.num_rus, config.num_users(), config.system.embb_users);
    let mut window = RateWindow::new(config.learning.window, nm, nu);
    let mut queues = vec![0.0; nm * ne];
    let mut series = MetricsSeries::default();
    for t in 0..config.evaluation.frames {
        let trace = traces.frame(t);
        let phi = estimate_flow_split(&window);
        let input = RelaxedInput { gains: &trace.gains, arrivals: &trace.arrivals.packets, phi: &phi, embb_queues: &queues };
        let sol = relaxed_frame_bound(config, &grid, &input, config.evaluation.relaxed_max_iters, config.evaluation.relaxed_tol);
        queues.clone_from(&sol.embb_queues_end);
        window.push(sol.served_per_flow.iter().map(|b| b / grid.frame_duration_s).collect());
        series.records.push(MetricsRecord {
            frame: t,
            scheme: SchemeId::RelaxedUpperBound.as_str().to_string(),
            seed,
            p_max_dbm: config.system.max_power_dbm,
            embb_throughput_bps: sol.served_bits / grid.frame_duration_s,
            worst_urllc_latency_s: sol.latency_lower_bound_s,
            avg_queue_bits: sol.queue_lower_bound,
            reward: compute_reward(sol.served_bits, sol.latency_lower_bound_s, 0, config),
            feasible: true,
        });
    }
    series
}

/// A tiny instance for exhaustive search: 2 RUs, one eMBB and one uRLLC
/// user, `f1` and `f2` RBs per slice and two 0.5 ms TTIs per 1 ms frame in
/// both slices. A 0 dBm budget and a heavy eMBB load keep queues nonzero so
/// the bounds separate.
pub fn tiny_config(f1: usize, f2: usize) -> SystemConfig {
    let mut c = SystemConfig::desk();
    let beta = 360e3;
    let guard = 0.1 * beta;
    let (b1, b2) = ((f1 as f64 + 0.5) * beta, (f2 as f64 + 0.5) * beta);
    c.system.num_rus = 2;
    c.system.embb_users = 1;
    c.system.urllc_users = 1;
    c.system.bandwidth_hz = b1 + b2 + guard;
    c.system.guard_band_hz = guard;
    c.system.alpha = (b2 + guard) / c.system.bandwidth_hz;
    c.system.frame_duration_s = 1e-3;
    let n = NumerologyConfig { rb_bandwidth_hz: beta, tti_duration_s: 0.5e-3 };
    c.numerologies = vec![n, n];
    c.qos.latency_budget_s = 0.5e-3;
    c.system.max_power_dbm = 0.0;
    c.traffic.arrival_rate_embb = 8.0;
    c.traffic.arrival_rate_urllc = 1.0;
    c.evaluation.frames = 1;
    c
}
