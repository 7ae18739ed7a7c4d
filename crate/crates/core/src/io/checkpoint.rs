//! Binary agent checkpoints.
//!
//! Layout, all integers and floats little-endian: the magic `ORTSCKPT`,
//! a `u32` version, a `u32` agent count, then per agent the shape
//! (`state_dim`, `num_heads`, `num_choices` as `u64`), the layer sizes
//! (`u64` count then `u64` each), `steps`, `epsilon`, the Adam
//! hyperparameters and step count, and the flat parameter arrays of the
//! evaluation net, target net and both Adam moments.

use crate::config::{build_rb_grid, Slice, SystemConfig};
use crate::ddqn::{agent_spec, Adam, AgentPair, AgentSpec, AgentState, Mlp, ReplayBuffer};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"ORTSCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} is not supported (expected {VERSION})")]
    Version { found: u32 },
    #[error("checkpoint truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("{extra} trailing bytes after the last agent")]
    Trailing { extra: usize },
    #[error("agent {agent}: {what} is {found}, expected {expected}")]
    Shape { agent: usize, what: &'static str, expected: String, found: String },
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn net(&mut self, m: &Mlp) {
        for v in m.flatten() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], CheckpointError> {
        let bytes = self.buf.get(self.pos..self.pos + N).ok_or(CheckpointError::Truncated { what })?;
        self.pos += N;
        Ok(bytes.try_into().expect("slice of length N"))
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }
    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        self.take::<8>(what).map(u64::from_le_bytes)
    }
    fn usize(&mut self, what: &'static str) -> Result<usize, CheckpointError> {
        self.u64(what).map(|v| v as usize)
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        self.take::<8>(what).map(f64::from_le_bytes)
    }
    fn net(&mut self, sizes: &[usize], what: &'static str) -> Result<Mlp, CheckpointError> {
        let mut m = Mlp::zeros(sizes);
        let n = m.num_params();
        if self.buf.len().saturating_sub(self.pos) < n * 8 {
            return Err(CheckpointError::Truncated { what });
        }
        let flat = (0..n).map(|_| self.f64(what)).collect::<Result<Vec<_>, _>>()?;
        m.assign_flat(&flat);
        Ok(m)
    }
}

pub fn encode_checkpoint(agents: &[AgentState]) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    w.0.extend_from_slice(&(agents.len() as u32).to_le_bytes());
    for a in agents {
        w.u64(a.spec.state_dim as u64);
        w.u64(a.spec.num_heads as u64);
        w.u64(a.spec.num_choices as u64);
        let sizes = a.eval.sizes();
        w.u64(sizes.len() as u64);
        for s in sizes {
            w.u64(s as u64);
        }
        w.u64(a.steps);
        w.f64(a.epsilon);
        w.f64(a.adam.beta1);
        w.f64(a.adam.beta2);
        w.f64(a.adam.eps);
        w.f64(a.adam.lr);
        w.u64(a.adam.t);
        w.net(&a.eval);
        w.net(&a.target);
        w.net(&a.adam.m);
        w.net(&a.adam.v);
    }
    w.0
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Vec<AgentState>, CheckpointError> {
    let mut r = Reader { buf, pos: 0 };
    if &r.take::<8>("magic").map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let count = r.u32("agent count")? as usize;
    let mut agents = Vec::with_capacity(count.min(16));
    for agent in 0..count {
        let spec = AgentSpec {
            state_dim: r.usize("state dimension")?,
            num_heads: r.usize("head count")?,
            num_choices: r.usize("choice count")?,
        };
        let n_layers = r.usize("layer count")?;
        if !(2..=64).contains(&n_layers) {
            return Err(CheckpointError::Shape {
                agent,
                what: "layer count",
                expected: "2..=64".into(),
                found: n_layers.to_string(),
            });
        }
        let sizes = (0..n_layers).map(|_| r.usize("layer sizes")).collect::<Result<Vec<_>, _>>()?;
        let ends = (spec.state_dim, spec.output_dim());
        if (sizes[0], sizes[n_layers - 1]) != ends {
            return Err(CheckpointError::Shape {
                agent,
                what: "network input/output",
                expected: format!("{ends:?}"),
                found: format!("{:?}", (sizes[0], sizes[n_layers - 1])),
            });
        }
        let steps = r.u64("steps")?;
        let epsilon = r.f64("epsilon")?;
        let (beta1, beta2, eps, lr) = (r.f64("adam")?, r.f64("adam")?, r.f64("adam")?, r.f64("adam")?);
        let t = r.u64("adam")?;
        let eval = r.net(&sizes, "evaluation net")?;
        let target = r.net(&sizes, "target net")?;
        let m = r.net(&sizes, "adam first moment")?;
        let v = r.net(&sizes, "adam second moment")?;
        agents.push(AgentState { spec, eval, target, adam: Adam { beta1, beta2, eps, lr, m, v, t }, steps, epsilon });
    }
    let extra = buf.len() - r.pos;
    if extra > 0 {
        return Err(CheckpointError::Trailing { extra });
    }
    Ok(agents)
}

pub fn save_checkpoint(agents: &AgentPair, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode_checkpoint(&agents.agents))
        .map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<AgentState>, CheckpointError> {
    let buf = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })?;
    decode_checkpoint(&buf)
}

/// Loads a checkpoint and checks that its agents fit `config`. Replay
/// memories start empty.
pub fn load_checkpoint_for(path: &Path, config: &SystemConfig) -> Result<AgentPair, CheckpointError> {
    let agents = load_checkpoint(path)?;
    if agents.len() != 2 {
        return Err(CheckpointError::Shape { agent: 0, what: "agent count", expected: "2".into(), found: agents.len().to_string() });
    }
    let grid = build_rb_grid(config);
    let l = &config.learning;
    for (s, a) in Slice::ALL.iter().zip(&agents) {
        let want = agent_spec(*s, config, &grid);
        let agent = s.index();
        let mismatch = |what, e: usize, f: usize| CheckpointError::Shape { agent, what, expected: e.to_string(), found: f.to_string() };
        if a.spec.state_dim != want.state_dim {
            return Err(mismatch("state dimension", want.state_dim, a.spec.state_dim));
        }
        if a.spec.num_heads != want.num_heads {
            return Err(mismatch("head count", want.num_heads, a.spec.num_heads));
        }
        if a.spec.num_choices != want.num_choices {
            return Err(mismatch("choice count", want.num_choices, a.spec.num_choices));
        }
        let sizes = want.layer_sizes(l.hidden_layers, l.hidden_units);
        if a.eval.sizes() != sizes {
            return Err(CheckpointError::Shape {
                agent,
                what: "layer sizes",
                expected: format!("{sizes:?}"),
                found: format!("{:?}", a.eval.sizes()),
            });
        }
    }
    let [a0, a1]: [AgentState; 2] = agents.try_into().expect("two agents");
    Ok(AgentPair { agents: [a0, a1], memories: Slice::ALL.map(|_| ReplayBuffer::new(l.replay_capacity)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (SystemConfig, AgentPair) {
        let c = crate::benchmarks::tiny_config(2, 1);
        let g = build_rb_grid(&c);
        let mut p = AgentPair::new(&c, &g, 9);
        p.agents[0].steps = 17;
        p.agents[1].epsilon = 0.25;
        p.agents[1].adam.t = 4;
        let zero = Mlp::zeros(&p.agents[1].target.sizes());
        p.agents[1].target.blend_from(&zero, 0.5);
        (c, p)
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let (c, p) = pair();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&p, &path).unwrap();
        let back = load_checkpoint_for(&path, &c).unwrap();
        assert_eq!(back.agents, p.agents);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(encode_checkpoint(&back.agents), bytes);
    }

    #[test]
    fn corrupt_inputs_are_named() {
        let (_, p) = pair();
        let bytes = encode_checkpoint(&p.agents);
        assert!(matches!(decode_checkpoint(b"NOTACKPT\x01\0\0\0"), Err(CheckpointError::BadMagic)));
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(matches!(decode_checkpoint(&v), Err(CheckpointError::Version { found: 9 })));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(CheckpointError::Truncated { .. })));
        let mut v = bytes.clone();
        v.push(0);
        assert!(matches!(decode_checkpoint(&v), Err(CheckpointError::Trailing { extra: 1 })));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&p, &path).unwrap();
        let other = crate::benchmarks::tiny_config(2, 2);
        let e = load_checkpoint_for(&path, &other).unwrap_err();
        assert!(matches!(e, CheckpointError::Shape { agent: 1, .. }), "{e}");
    }
}
