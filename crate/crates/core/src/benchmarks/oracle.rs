//! Side-by-side bounds on random tiny instances.

use super::brute_force::{brute_force_optimum, score_assignment, BruteForceOptimum, SearchSpaceTooLarge};
use super::heuristic::{heuristic_assignment, HeuristicInput};
use super::relaxed::{relaxed_frame_bound, RelaxedInput};
use super::tiny_config;
use crate::channel::{scenario_topology, FrameTrace, GeneratedTraces, TracePhase, TraceSource};
use crate::config::{build_rb_grid, SystemConfig};
use crate::ddqn::check_constraints;
use crate::flow_split::uniform_flow_split;
use crate::rates::{QueueState, RbAssignment};
use crate::rng::{stream_rng, Stream};
use crate::slicing::quotas;
use rand::Rng;

/// Tiny instance `index` of the oracle family drawn from `seed`: grid sizes
/// uniform over `{1, 2}` per slice and the first evaluation frame of its
/// own scenario.
pub fn tiny_instance(seed: u64, index: u64) -> (SystemConfig, FrameTrace) {
    let mut rng = stream_rng(seed, Stream::Oracle, index);
    let config = tiny_config(rng.random_range(1..=2), rng.random_range(1..=2));
    let trace = instance_trace(&config, seed, index);
    (config, trace)
}

/// The trace of instance `index` under a possibly modified config.
pub fn instance_trace(config: &SystemConfig, seed: u64, index: u64) -> FrameTrace {
    let scenario = seed.wrapping_mul(1_000_003).wrapping_add(index);
    GeneratedTraces::new(config, scenario_topology(config, scenario), scenario, TracePhase::Eval).frame(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub relaxed_bound: f64,
    pub relaxed_converged: bool,
    pub brute_force: Option<BruteForceOptimum>,
    pub heuristic: RbAssignment,
    pub heuristic_objective: f64,
    /// Free of constraint violations, the feasible set of the exhaustive search.
    pub heuristic_feasible: bool,
    /// Power overruns plus queue shortfalls of the heuristic frame.
    pub heuristic_shortfalls: usize,
}

/// Every bound is taken as the first frame of an episode: empty queues and
/// the uniform flow split.
pub fn compare_on(config: &SystemConfig, trace: &FrameTrace) -> Result<OracleComparison, SearchSpaceTooLarge> {
    let grid = build_rb_grid(config);
    let (nm, nu) = (config.system.num_rus, config.num_users());
    let phi = uniform_flow_split(nm, nu);
    let arrivals = &trace.arrivals.packets;
    let embb_queues = vec![0.0; nm * config.system.embb_users];
    let relaxed = relaxed_frame_bound(
        config,
        &grid,
        &RelaxedInput { gains: &trace.gains, arrivals, phi: &phi, embb_queues: &embb_queues },
        config.evaluation.relaxed_max_iters,
        config.evaluation.relaxed_tol,
    );
    let brute_force = brute_force_optimum(config, trace)?;
    let q = quotas(arrivals, &grid, config);
    let queues = QueueState::zeros(nm, nu);
    let heuristic = heuristic_assignment(
        config,
        &grid,
        &HeuristicInput { quotas: &q, arrivals, phi: &phi, queues: &queues, gains: &trace.gains },
    );
    let outcome = score_assignment(config, trace, &heuristic);
    let heuristic_feasible = check_constraints(&heuristic, &q, arrivals, &grid, config).is_empty();
    Ok(OracleComparison {
        relaxed_bound: relaxed.objective_bound,
        relaxed_converged: relaxed.converged,
        brute_force,
        heuristic_objective: outcome.utility,
        heuristic_shortfalls: outcome.penalties,
        heuristic,
        heuristic_feasible,
    })
}
