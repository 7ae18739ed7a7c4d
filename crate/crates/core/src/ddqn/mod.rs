//! Cooperative DDQN agents, one per slice, that pick the frame's RB
//! assignment.

pub mod agent;
pub mod encoding;
pub mod mlp;
pub mod replay;
pub mod reward;

pub use agent::{
    ddqn_target, select_action, select_joint_action, train_on_batch, train_step, AgentSpec, AgentState, InsufficientReplay,
};
pub use encoding::{agent_spec, assignment_from_choices, encode_state, Observation};
pub use mlp::{Adam, Mlp};
pub use replay::{Experience, ReplayBuffer};
pub use reward::{check_constraints, compute_reward, Violation};

use crate::config::{RbGrid, Slice, SystemConfig};
use crate::rng::{stream_rng, Stream};

/// Both agents with their replay memories; index 0 owns the eMBB slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPair {
    pub agents: [AgentState; 2],
    pub memories: [ReplayBuffer; 2],
}

impl AgentPair {
    pub fn new(config: &SystemConfig, grid: &RbGrid, seed: u64) -> Self {
        let agents = Slice::ALL.map(|s| {
            let spec = agent_spec(s, config, grid);
            AgentState::new(spec, &config.learning, &mut stream_rng(seed, Stream::Init, s.index() as u64))
        });
        let memories = Slice::ALL.map(|_| ReplayBuffer::new(config.learning.replay_capacity));
        Self { agents, memories }
    }
}
