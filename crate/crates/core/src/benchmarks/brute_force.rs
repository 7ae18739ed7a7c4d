//! Exhaustive search over every head-choice vector of both slices.

use crate::channel::FrameTrace;
use crate::config::{RbGrid, Slice, SystemConfig};
use crate::ddqn::{agent_spec, assignment_from_choices, check_constraints};
use crate::rates::RbAssignment;
use crate::sim::{run_frame, FrameOutcome, PhiMode, World};
use thiserror::Error;

pub const SEARCH_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("search space holds {size} assignments, limit is {limit}")]
pub struct SearchSpaceTooLarge {
    pub size: f64,
    pub limit: f64,
}

/// Number of joint head-choice vectors.
pub fn search_space_size(config: &SystemConfig, grid: &RbGrid) -> f64 {
    Slice::ALL
        .iter()
        .map(|&s| {
            let spec = agent_spec(s, config, grid);
            (spec.num_choices as f64).powi(spec.num_heads as i32)
        })
        .product()
}

/// Outcome of `pi` as the first frame of an episode: empty queues and the
/// uniform flow split.
pub fn score_assignment(config: &SystemConfig, trace: &FrameTrace, pi: &RbAssignment) -> FrameOutcome {
    let mut world = World::new(config);
    let phi = world.flow_split(PhiMode::Uniform);
    run_frame(&mut world, trace, &phi, pi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptimum {
    pub choices: [Vec<usize>; 2],
    pub assignment: RbAssignment,
    pub objective: f64,
    pub outcome: FrameOutcome,
    pub feasible_count: usize,
}

/// Minimises the frame utility over all assignments free of constraint
/// violations, scored by [`score_assignment`]. Ties keep the first vector in
/// mixed-radix order with the eMBB slice's first head most significant.
/// `Ok(None)` means no assignment is feasible.
pub fn brute_force_optimum(
    config: &SystemConfig,
    trace: &FrameTrace,
) -> Result<Option<BruteForceOptimum>, SearchSpaceTooLarge> {
    let mut world = World::new(config);
    let size = search_space_size(config, &world.grid);
    if size > SEARCH_LIMIT {
        return Err(SearchSpaceTooLarge { size, limit: SEARCH_LIMIT });
    }
    let grid = world.grid.clone();
    let specs = Slice::ALL.map(|s| agent_spec(s, config, &grid));
    let phi = world.flow_split(PhiMode::Uniform);
    let q = world.quotas(trace);
    let arrivals = &trace.arrivals.packets;

    let enumerate = |slice: usize| -> Vec<Vec<usize>> {
        let spec = specs[slice];
        let mut out = Vec::new();
        let mut digits = vec![0usize; spec.num_heads];
        loop {
            out.push(digits.clone());
            let mut h = spec.num_heads;
            loop {
                if h == 0 {
                    return out;
                }
                h -= 1;
                digits[h] += 1;
                if digits[h] < spec.num_choices {
                    break;
                }
                digits[h] = 0;
            }
        }
    };
    let firsts = enumerate(0);
    let seconds = enumerate(1);
    let mut best: Option<BruteForceOptimum> = None;
    let mut feasible_count = 0;
    let start = world.clone();
    for a in &firsts {
        for b in &seconds {
            let choices = [a.clone(), b.clone()];
            let pi = assignment_from_choices(&choices, config, &grid);
            if !check_constraints(&pi, &q, arrivals, &grid, config).is_empty() {
                continue;
            }
            feasible_count += 1;
            world.clone_from(&start);
            let outcome = run_frame(&mut world, trace, &phi, &pi);
            if best.as_ref().is_none_or(|b| outcome.utility < b.objective) {
                best = Some(BruteForceOptimum { choices, assignment: pi, objective: outcome.utility, outcome, feasible_count: 0 });
            }
        }
    }
    Ok(best.map(|b| BruteForceOptimum { feasible_count, ..b }))
}
