//! Topology, Rayleigh-faded per-RB channel gains, and Poisson arrivals.

use crate::config::{build_rb_grid, FadingBlock, RbGrid, ServiceClass, Slice, SystemConfig};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use std::f64::consts::PI;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ru_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub user_class: Vec<ServiceClass>,
}

impl Topology {
    pub fn distance(&self, ru: usize, user: usize) -> f64 {
        let a = self.ru_positions[ru];
        let b = self.user_positions[user];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// Users uniform in the cell disk; RUs evenly spaced on a circle of half
/// the cell radius.
pub fn sample_topology<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Topology {
    let radius = config.system.cell_radius_m;
    let m = config.system.num_rus;
    let ru_positions = (0..m)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / m as f64;
            [0.5 * radius * theta.cos(), 0.5 * radius * theta.sin()]
        })
        .collect();
    let user_positions = (0..config.num_users())
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            [r * theta.cos(), r * theta.sin()]
        })
        .collect();
    let user_class = (0..config.num_users()).map(|u| config.user_class(u)).collect();
    Topology { ru_positions, user_positions, user_class }
}

/// Topology of a run: pinned by `system.topology_seed` when set, otherwise
/// derived from the run seed.
pub fn scenario_topology(config: &SystemConfig, seed: u64) -> Topology {
    let seed = config.system.topology_seed.unwrap_or(seed);
    sample_topology(config, &mut stream_rng(seed, Stream::Topology, 0))
}

/// 3GPP macro path loss in dB, distance in metres.
pub fn path_loss_db(distance_m: f64) -> f64 {
    128.1 + 37.6 * (distance_m / 1000.0).log10()
}

pub fn path_gain(distance_m: f64, min_distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(distance_m.max(min_distance_m)) / 10.0)
}

/// One slice's gains for one frame, laid out `[ru][user][rb][tti]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGains {
    pub num_rbs: usize,
    pub num_ttis: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    pub num_rus: usize,
    pub num_users: usize,
    pub slices: [SliceGains; 2],
}

impl ChannelGains {
    fn offset(&self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize) -> usize {
        let sg = &self.slices[s.index()];
        ((ru * self.num_users + user) * sg.num_rbs + rb) * sg.num_ttis + tti
    }

    pub fn get(&self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize) -> f64 {
        self.slices[s.index()].data[self.offset(s, ru, user, rb, tti)]
    }

    pub fn set(&mut self, s: Slice, ru: usize, user: usize, rb: usize, tti: usize, g: f64) {
        let k = self.offset(s, ru, user, rb, tti);
        self.slices[s.index()].data[k] = g;
    }

    /// All-`value` tensor shaped for `grid`.
    pub fn filled(num_rus: usize, num_users: usize, grid: &RbGrid, value: f64) -> Self {
        let mk = |s: Slice| {
            let sg = grid.slice(s);
            SliceGains {
                num_rbs: sg.num_rbs,
                num_ttis: sg.num_ttis,
                data: vec![value; num_rus * num_users * sg.num_rbs * sg.num_ttis],
            }
        };
        Self { num_rus, num_users, slices: [mk(Slice::Embb), mk(Slice::Urllc)] }
    }

    /// Mean gain over the frame's TTIs for each `(ru, user, rb)`.
    pub fn rb_mean(&self, s: Slice, ru: usize, user: usize, rb: usize) -> f64 {
        let sg = &self.slices[s.index()];
        if sg.num_ttis == 0 {
            return 0.0;
        }
        let start = self.offset(s, ru, user, rb, 0);
        sg.data[start..start + sg.num_ttis].iter().sum::<f64>() / sg.num_ttis as f64
    }
}

/// g = |h|^2 * 10^(-PL/10) with |h|^2 ~ Exp(1), independent per
/// `(ru, user, rb, tti)` (or per `(ru, user, rb)` with frame-block fading).
pub fn sample_channel_gains<R: Rng + ?Sized>(
    topology: &Topology,
    grid: &RbGrid,
    config: &SystemConfig,
    rng: &mut R,
) -> ChannelGains {
    let m = topology.ru_positions.len();
    let u = topology.user_positions.len();
    let mut gains = ChannelGains::filled(m, u, grid, 0.0);
    for s in Slice::ALL {
        let sg = grid.slice(s);
        for ru in 0..m {
            for user in 0..u {
                let mean = path_gain(topology.distance(ru, user), config.channel.min_distance_m);
                for rb in 0..sg.num_rbs {
                    let mut block: f64 = rng.sample(Exp1);
                    for tti in 0..sg.num_ttis {
                        if config.channel.fading_block == FadingBlock::Tti && tti > 0 {
                            block = rng.sample(Exp1);
                        }
                        // Exp1 can return exactly 0; gains must stay positive.
                        gains.set(s, ru, user, rb, tti, mean * block.max(f64::MIN_POSITIVE));
                    }
                }
            }
        }
    }
    gains
}

/// Packets arriving per user in one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficArrivals {
    pub packets: Vec<u64>,
}

pub fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

pub fn sample_arrivals<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> TrafficArrivals {
    TrafficArrivals {
        packets: (0..config.num_users())
            .map(|u| poisson_draw(config.arrival_rate(config.user_class(u)), rng))
            .collect(),
    }
}

/// Channel and traffic realisation of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub gains: ChannelGains,
    pub arrivals: TrafficArrivals,
}

/// Source of per-frame traces, either generated or replayed from disk.
pub trait TraceSource {
    fn frame(&self, t: usize) -> FrameTrace;
    fn len_hint(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePhase {
    /// Episode `n` of training.
    Train(u64),
    Eval,
}

/// Deterministic generator: frame `t` always yields the same trace for the
/// same `(seed, phase)`, regardless of access order. Arrivals use their own
/// stream so that schemes with different grids see identical traffic.
#[derive(Debug, Clone)]
pub struct GeneratedTraces {
    pub config: SystemConfig,
    pub grid: RbGrid,
    pub topology: Topology,
    pub seed: u64,
    pub phase: TracePhase,
}

impl GeneratedTraces {
    pub fn new(config: &SystemConfig, topology: Topology, seed: u64, phase: TracePhase) -> Self {
        Self { config: config.clone(), grid: build_rb_grid(config), topology, seed, phase }
    }

    fn index(&self, t: usize) -> (Stream, Stream, u64) {
        match self.phase {
            TracePhase::Train(ep) => (Stream::TrainGains, Stream::TrainArrivals, (ep << 32) | t as u64),
            TracePhase::Eval => (Stream::EvalGains, Stream::EvalArrivals, t as u64),
        }
    }
}

impl TraceSource for GeneratedTraces {
    fn frame(&self, t: usize) -> FrameTrace {
        let (gs, as_, idx) = self.index(t);
        let gains = sample_channel_gains(
            &self.topology,
            &self.grid,
            &self.config,
            &mut stream_rng(self.seed, gs, idx),
        );
        let arrivals = sample_arrivals(&self.config, &mut stream_rng(self.seed, as_, idx));
        FrameTrace { gains, arrivals }
    }
}

/// Traces held in memory, e.g. loaded from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedTraces {
    pub frames: Vec<FrameTrace>,
}

impl TraceSource for RecordedTraces {
    fn frame(&self, t: usize) -> FrameTrace {
        self.frames[t].clone()
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.frames.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1000.0) - 128.1).abs() < 1e-12);
        assert!((path_loss_db(100.0) - 90.5).abs() < 1e-12);
        // 37.6 * log10(0.5) = -11.3186
        assert!((path_loss_db(500.0) - 116.7814).abs() < 1e-3);
    }

    #[test]
    fn distance_is_clamped() {
        assert_eq!(path_gain(0.0, 10.0), path_gain(10.0, 10.0));
        assert!(path_gain(0.0, 10.0).is_finite());
    }

    #[test]
    fn users_inside_cell() {
        let c = SystemConfig::reference();
        for seed in 0..5 {
            let t = sample_topology(&c, &mut SimRng::seed_from_u64(seed));
            assert_eq!(t.user_class.len(), 12);
            for p in &t.user_positions {
                assert!((p[0] * p[0] + p[1] * p[1]).sqrt() <= 500.0 + 1e-9);
            }
        }
    }

    #[test]
    fn zero_radius_puts_users_at_origin() {
        let mut c = SystemConfig::reference();
        c.system.cell_radius_m = 0.0;
        let t = sample_topology(&c, &mut SimRng::seed_from_u64(1));
        assert!(t.user_positions.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn topology_deterministic() {
        let c = SystemConfig::desk();
        assert_eq!(scenario_topology(&c, 3), scenario_topology(&c, 3));
        assert_ne!(scenario_topology(&c, 3), scenario_topology(&c, 4));
    }

    #[test]
    fn gains_positive_and_reproducible() {
        let c = SystemConfig::desk();
        let topo = scenario_topology(&c, 9);
        let grid = build_rb_grid(&c);
        let a = sample_channel_gains(&topo, &grid, &c, &mut SimRng::seed_from_u64(5));
        let b = sample_channel_gains(&topo, &grid, &c, &mut SimRng::seed_from_u64(5));
        assert_eq!(a, b);
        for s in &a.slices {
            assert!(s.data.iter().all(|g| *g > 0.0 && g.is_finite()));
        }
    }

    #[test]
    fn frame_block_fading_is_constant_in_time() {
        let mut c = SystemConfig::desk();
        c.channel.fading_block = FadingBlock::Frame;
        let topo = scenario_topology(&c, 1);
        let grid = build_rb_grid(&c);
        let g = sample_channel_gains(&topo, &grid, &c, &mut SimRng::seed_from_u64(2));
        for t in 1..grid.slice(Slice::Urllc).num_ttis {
            assert_eq!(g.get(Slice::Urllc, 1, 2, 1, t), g.get(Slice::Urllc, 1, 2, 1, 0));
        }
    }

    #[test]
    fn fading_mean_matches_path_loss() {
        // Monte-Carlo oracle: E|h|^2 = 1, so the sample mean of g at a fixed
        // distance should sit within 2% of the path gain for 1e5 draws.
        let mut c = SystemConfig::desk();
        c.system.num_rus = 1;
        c.system.embb_users = 1;
        c.system.urllc_users = 0;
        let topo = Topology {
            ru_positions: vec![[0.0, 0.0]],
            user_positions: vec![[1000.0, 0.0]],
            user_class: vec![ServiceClass::Embb],
        };
        let grid = build_rb_grid(&c);
        let mut rng = SimRng::seed_from_u64(11);
        let mut sum = 0.0;
        let mut n = 0usize;
        while n < 100_000 {
            let g = sample_channel_gains(&topo, &grid, &c, &mut rng);
            for s in &g.slices {
                sum += s.data.iter().sum::<f64>();
                n += s.data.len();
            }
        }
        let expected = 10f64.powf(-12.81);
        let mean = sum / n as f64;
        assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean} vs {expected}");
    }

    #[test]
    fn poisson_zero_mean() {
        let mut rng = SimRng::seed_from_u64(0);
        assert!((0..100).all(|_| poisson_draw(0.0, &mut rng) == 0));
    }

    #[test]
    fn poisson_sample_mean() {
        let mut rng = SimRng::seed_from_u64(42);
        let n = 100_000;
        let mean = (0..n).map(|_| poisson_draw(1.12, &mut rng) as f64).sum::<f64>() / n as f64;
        let sigma = 1.12f64.sqrt();
        assert!((mean - 1.12).abs() <= 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn arrivals_use_class_rates() {
        let c = SystemConfig::reference();
        let mut rng = SimRng::seed_from_u64(3);
        let frames = 4000;
        let mut sums = vec![0u64; c.num_users()];
        for _ in 0..frames {
            for (s, p) in sums.iter_mut().zip(sample_arrivals(&c, &mut rng).packets) {
                *s += p;
            }
        }
        let em = sums[0] as f64 / frames as f64;
        let ur = sums[c.num_users() - 1] as f64 / frames as f64;
        assert!((em - 21.12).abs() < 0.5, "{em}");
        assert!((ur - 1.12).abs() < 0.1, "{ur}");
    }

    #[test]
    fn generated_traces_are_random_access() {
        let c = SystemConfig::desk();
        let topo = scenario_topology(&c, 1);
        let tr = GeneratedTraces::new(&c, topo, 1, TracePhase::Eval);
        let f3 = tr.frame(3);
        let _ = tr.frame(0);
        assert_eq!(tr.frame(3), f3);
        let fixed = GeneratedTraces::new(
            &c.with_fixed_numerology(),
            scenario_topology(&c, 1),
            1,
            TracePhase::Eval,
        );
        assert_eq!(fixed.frame(3).arrivals, f3.arrivals);
    }
}
