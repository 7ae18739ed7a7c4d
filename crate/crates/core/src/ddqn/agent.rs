//! One DDQN agent with factored per-RB heads.

use super::mlp::{Adam, Mlp};
use super::replay::{Experience, ReplayBuffer};
use crate::config::{Exploration, LearningConfig, TargetUpdate};
use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentSpec {
    pub state_dim: usize,
    pub num_heads: usize,
    pub num_choices: usize,
}

impl AgentSpec {
    pub fn output_dim(&self) -> usize {
        self.num_heads * self.num_choices
    }

    pub fn layer_sizes(&self, hidden_layers: usize, hidden_units: usize) -> Vec<usize> {
        let mut s = vec![self.state_dim];
        s.extend(std::iter::repeat_n(hidden_units, hidden_layers));
        s.push(self.output_dim());
        s
    }
}

/// Learnable state of an agent: evaluation and target networks, optimiser
/// moments, the update counter and the exploration rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub spec: AgentSpec,
    pub eval: Mlp,
    pub target: Mlp,
    pub adam: Adam,
    pub steps: u64,
    pub epsilon: f64,
}

impl AgentState {
    /// Random evaluation net; the target starts as an exact copy.
    pub fn new<R: Rng + ?Sized>(spec: AgentSpec, cfg: &LearningConfig, rng: &mut R) -> Self {
        let eval = Mlp::new(&spec.layer_sizes(cfg.hidden_layers, cfg.hidden_units), rng);
        let adam = Adam::new(&eval, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        Self { spec, target: eval.clone(), eval, adam, steps: 0, epsilon: cfg.epsilon_start }
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.eval.forward_one(state)
    }

    pub fn decay_epsilon(&mut self, cfg: &LearningConfig) {
        self.epsilon = (self.epsilon * cfg.epsilon_decay).max(cfg.epsilon_end);
    }
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-head greedy choices from flat `[head][choice]` values.
pub fn greedy_choices(q: &[f64], num_choices: usize) -> Vec<usize> {
    q.chunks(num_choices).map(argmax).collect()
}

/// Epsilon-greedy action, one choice per head.
pub fn select_action<R: Rng + ?Sized>(
    agent: &AgentState,
    state: &[f64],
    mode: Exploration,
    rng: &mut R,
) -> Vec<usize> {
    let AgentSpec { num_heads, num_choices, .. } = agent.spec;
    let explore: Vec<bool> = match mode {
        Exploration::PerHead => (0..num_heads).map(|_| rng.random::<f64>() < agent.epsilon).collect(),
        Exploration::Joint => vec![rng.random::<f64>() < agent.epsilon; num_heads],
    };
    let greedy = if explore.iter().all(|e| *e) {
        Vec::new()
    } else {
        greedy_choices(&agent.q_values(state), num_choices)
    };
    explore
        .iter()
        .enumerate()
        .map(|(h, &e)| if e { rng.random_range(0..num_choices) } else { greedy[h] })
        .collect()
}

/// Random choice for every head.
pub fn random_action<R: Rng + ?Sized>(spec: &AgentSpec, rng: &mut R) -> Vec<usize> {
    (0..spec.num_heads).map(|_| rng.random_range(0..spec.num_choices)).collect()
}

/// Action of both agents. In joint mode a single coin decides whether the
/// whole joint action is random.
pub fn select_joint_action<R: Rng + ?Sized>(
    agents: &[AgentState; 2],
    states: &[Vec<f64>; 2],
    mode: Exploration,
    rng: &mut R,
) -> [Vec<usize>; 2] {
    match mode {
        Exploration::PerHead => [0, 1].map(|i| select_action(&agents[i], &states[i], mode, rng)),
        Exploration::Joint => {
            if rng.random::<f64>() < agents[0].epsilon {
                [0, 1].map(|i| random_action(&agents[i].spec, rng))
            } else {
                [0, 1].map(|i| greedy_choices(&agents[i].q_values(&states[i]), agents[i].spec.num_choices))
            }
        }
    }
}

/// Double-DQN targets per head: the evaluation net picks the next choice,
/// the target net values it.
pub fn ddqn_target(
    reward: f64,
    gamma: f64,
    q_eval_next: &[f64],
    q_target_next: &[f64],
    num_choices: usize,
    terminal: bool,
) -> Vec<f64> {
    q_eval_next
        .chunks(num_choices)
        .zip(q_target_next.chunks(num_choices))
        .map(|(e, t)| if terminal { reward } else { reward + gamma * t[argmax(e)] })
        .collect()
}

/// Mean squared error over batch and heads on the taken choices, and its
/// gradient with respect to the network parameters.
pub fn mse_loss_grad(
    net: &Mlp,
    states: Array2<f64>,
    actions: &[Vec<usize>],
    targets: &[Vec<f64>],
    num_choices: usize,
) -> (f64, Mlp) {
    let cache = net.forward_cached(states);
    let q = cache.output();
    let (b, heads) = (actions.len(), actions[0].len());
    let norm = (b * heads) as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for i in 0..b {
        for h in 0..heads {
            let col = h * num_choices + actions[i][h];
            let err = q[[i, col]] - targets[i][h];
            loss += err * err;
            d_out[[i, col]] = 2.0 * err / norm;
        }
    }
    (loss / norm, net.backward(&cache, d_out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("replay holds {have} transitions, batch needs {need}")]
pub struct InsufficientReplay {
    pub have: usize,
    pub need: usize,
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flatten().collect();
    Array2::from_shape_vec((flat.len() / width.max(1), width), flat).expect("uniform row width")
}

/// One gradient step on an explicit minibatch, followed by the target update.
pub fn train_on_batch(agent: &mut AgentState, batch: &[&Experience], cfg: &LearningConfig) -> f64 {
    let spec = agent.spec;
    let next = stack(batch.iter().map(|e| e.next_state.clone()), spec.state_dim);
    let q_eval_next = agent.eval.forward(next.clone());
    let q_target_next = agent.target.forward(next);
    let targets: Vec<Vec<f64>> = batch
        .iter()
        .enumerate()
        .map(|(i, e)| {
            ddqn_target(
                e.reward,
                cfg.discount,
                q_eval_next.row(i).as_slice().expect("standard layout"),
                q_target_next.row(i).as_slice().expect("standard layout"),
                spec.num_choices,
                e.terminal,
            )
        })
        .collect();
    let states = stack(batch.iter().map(|e| e.state.clone()), spec.state_dim);
    let actions: Vec<Vec<usize>> = batch.iter().map(|e| e.action.clone()).collect();
    let (loss, grads) = mse_loss_grad(&agent.eval, states, &actions, &targets, spec.num_choices);
    agent.adam.step(&mut agent.eval, &grads);
    agent.steps += 1;
    match cfg.target_update {
        TargetUpdate::Soft => agent.target.blend_from(&agent.eval, cfg.soft_update_coeff),
        TargetUpdate::Hard => {
            if agent.steps % cfg.target_update_period.max(1) == 0 {
                agent.target = agent.eval.clone();
            }
        }
    }
    loss
}

/// Samples a uniform minibatch and trains on it.
pub fn train_step<R: Rng + ?Sized>(
    agent: &mut AgentState,
    memory: &ReplayBuffer,
    cfg: &LearningConfig,
    rng: &mut R,
) -> Result<f64, InsufficientReplay> {
    if memory.len() < cfg.batch_size {
        return Err(InsufficientReplay { have: memory.len(), need: cfg.batch_size });
    }
    let batch = memory.sample(cfg.batch_size, rng);
    Ok(train_on_batch(agent, &batch, cfg))
}
