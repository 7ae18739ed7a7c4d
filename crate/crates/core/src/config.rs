//! System configuration, the mixed-numerology RB grid, and index conventions.
//!
//! Users are indexed globally: `0..embb_users` are eMBB users and
//! `embb_users..embb_users + urllc_users` are uRLLC users. Slice 0 is the
//! eMBB slice (numerology index 1), slice 1 the uRLLC slice (index 2).

use serde::{Deserialize, Serialize};
use std::fmt;

/// Relative slack used when checking that durations divide each other.
const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceClass {
    Embb,
    Urllc,
}

/// The two bandwidth parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slice {
    Embb = 0,
    Urllc = 1,
}

impl Slice {
    pub const ALL: [Slice; 2] = [Slice::Embb, Slice::Urllc];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumerologyConfig {
    pub rb_bandwidth_hz: f64,
    pub tti_duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyConstants {
    pub cu_proc_s: f64,
    pub du_proc_s: f64,
    pub ru_proc_s: f64,
    pub mh_tx_s: f64,
    pub fh_tx_s: f64,
}

impl LatencyConstants {
    pub fn total(&self) -> f64 {
        self.cu_proc_s + self.du_proc_s + self.ru_proc_s + self.mh_tx_s + self.fh_tx_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub num_rus: usize,
    pub embb_users: usize,
    pub urllc_users: usize,
    pub bandwidth_hz: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::guard_band_hz")]
    pub guard_band_hz: f64,
    #[serde(default = "defaults::frame_duration_s")]
    pub frame_duration_s: f64,
    #[serde(default = "defaults::cell_radius_m")]
    pub cell_radius_m: f64,
    #[serde(default = "defaults::max_power_dbm")]
    pub max_power_dbm: f64,
    #[serde(default = "defaults::noise_power_dbm")]
    pub noise_power_dbm: f64,
    /// Pins the user/RU layout independently of the run seed.
    #[serde(default)]
    pub topology_seed: Option<u64>,
}

/// When the per-frame arrivals of a sub-flow enter its queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalCrediting {
    /// The whole frame's bits are credited at the first TTI.
    #[default]
    FrameStart,
    /// Bits are spread evenly over the TTIs of the user's own slice.
    PerTti,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub packet_size_embb_bits: u64,
    pub packet_size_urllc_bits: u64,
    pub arrival_rate_embb: f64,
    pub arrival_rate_urllc: f64,
    pub arrival_crediting: ArrivalCrediting,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            packet_size_embb_bits: 50_000 * 8,
            packet_size_urllc_bits: 32 * 8,
            arrival_rate_embb: 21.12,
            arrival_rate_urllc: 1.12,
            arrival_crediting: ArrivalCrediting::FrameStart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QosConfig {
    /// Linear SNR floor for every uRLLC RB.
    pub urllc_snr_floor: f64,
    pub error_prob: f64,
    pub latency_budget_s: f64,
    pub queue_cap_bits: f64,
    pub required_embb_rate_bps: f64,
    pub urllc_overflow_divisor: u32,
    /// Tail-drop arrivals that would push an RU's backlog above the cap.
    pub drop_on_overflow: bool,
    /// Require at least one uRLLC-slice TTI inside the latency budget.
    pub enforce_urllc_window: bool,
}

impl Default for QosConfig {
    fn default() -> Self {
        Self {
            urllc_snr_floor: 10f64.powf(0.5),
            error_prob: 1e-3,
            latency_budget_s: 0.5e-3,
            queue_cap_bits: 10_000.0 * 8.0,
            required_embb_rate_bps: 10e6,
            urllc_overflow_divisor: 2,
            drop_on_overflow: false,
            enforce_urllc_window: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    pub omega: f64,
    pub ref_queue_bits: f64,
    pub ref_latency_s: f64,
    /// Reference eMBB bits per frame; derived from the required rate when absent.
    pub ref_rate_bits: Option<f64>,
    pub penalty_value: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            omega: 0.5,
            ref_queue_bits: 10_000.0 * 8.0,
            ref_latency_s: 0.5e-3,
            ref_rate_bits: None,
            penalty_value: -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingBlock {
    #[default]
    Tti,
    Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub fading_block: FadingBlock,
    pub min_distance_m: f64,
    /// log10 gain bounds mapped onto [-1, 1] in the learner's state.
    pub gain_log10_min: f64,
    pub gain_log10_max: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            fading_block: FadingBlock::Tti,
            min_distance_m: 10.0,
            gain_log10_min: -16.0,
            gain_log10_max: -8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetUpdate {
    /// Polyak averaging after every training step.
    #[default]
    Soft,
    /// Copy the evaluation network every `target_update_period` steps.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// Each RB head draws its own exploration coin.
    #[default]
    PerHead,
    /// One coin decides for the whole joint action.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub window: usize,
    pub discount: f64,
    pub target_update: TargetUpdate,
    pub target_update_period: u64,
    pub soft_update_coeff: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub exploration: Exploration,
    pub epochs: usize,
    pub frames_per_episode: usize,
    /// eMBB and uRLLC arrival counts are divided by these before entering
    /// the state.
    pub arrival_norm: f64,
    pub arrival_norm_urllc: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            window: 5,
            discount: 0.99,
            target_update: TargetUpdate::Soft,
            target_update_period: 100,
            soft_update_coeff: 0.01,
            replay_capacity: 1_000_000,
            batch_size: 100,
            hidden_layers: 4,
            hidden_units: 512,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.995,
            exploration: Exploration::PerHead,
            epochs: 500,
            frames_per_episode: 100,
            arrival_norm: 50.0,
            arrival_norm_urllc: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub frames: usize,
    pub relaxed_max_iters: usize,
    pub relaxed_tol: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            frames: 1000,
            relaxed_max_iters: 500,
            relaxed_tol: 1e-6,
        }
    }
}

/// Every physical, slicing, traffic, and learning parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub system: SystemSection,
    #[serde(default = "defaults::numerologies")]
    pub numerologies: Vec<NumerologyConfig>,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub qos: QosConfig,
    #[serde(default)]
    pub utility: UtilityConfig,
    #[serde(default)]
    pub latency: LatencyConstants,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

mod defaults {
    use super::NumerologyConfig;

    pub fn alpha() -> f64 {
        0.2
    }
    pub fn guard_band_hz() -> f64 {
        180e3
    }
    pub fn frame_duration_s() -> f64 {
        10e-3
    }
    pub fn cell_radius_m() -> f64 {
        500.0
    }
    pub fn max_power_dbm() -> f64 {
        46.0
    }
    pub fn noise_power_dbm() -> f64 {
        -110.0
    }
    pub fn numerologies() -> Vec<NumerologyConfig> {
        vec![
            NumerologyConfig { rb_bandwidth_hz: 180e3, tti_duration_s: 1e-3 },
            NumerologyConfig { rb_bandwidth_hz: 720e3, tti_duration_s: 0.25e-3 },
        ]
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl SystemConfig {
    /// The reference scenario: 4 RUs, 9 eMBB and 3 uRLLC users on 10 MHz.
    pub fn reference() -> Self {
        Self {
            system: SystemSection {
                num_rus: 4,
                embb_users: 9,
                urllc_users: 3,
                bandwidth_hz: 10e6,
                alpha: defaults::alpha(),
                guard_band_hz: defaults::guard_band_hz(),
                frame_duration_s: defaults::frame_duration_s(),
                cell_radius_m: defaults::cell_radius_m(),
                max_power_dbm: defaults::max_power_dbm(),
                noise_power_dbm: defaults::noise_power_dbm(),
                topology_seed: None,
            },
            numerologies: defaults::numerologies(),
            traffic: TrafficConfig::default(),
            qos: QosConfig::default(),
            utility: UtilityConfig::default(),
            latency: LatencyConstants::default(),
            channel: ChannelConfig::default(),
            learning: LearningConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }

    /// A small instance that trains in seconds on one core: 2 RUs, 3 eMBB
    /// users, 1 uRLLC user, 8 eMBB-slice RBs and 2 uRLLC-slice RBs over a
    /// 2 ms frame.
    pub fn desk() -> Self {
        let mut c = Self::reference();
        c.system.num_rus = 2;
        c.system.embb_users = 3;
        c.system.urllc_users = 1;
        c.system.bandwidth_hz = 3.2e6;
        c.system.alpha = 0.52;
        c.system.frame_duration_s = 2e-3;
        c.system.max_power_dbm = 20.0;
        c.traffic.packet_size_embb_bits = 400;
        c.qos.required_embb_rate_bps = 4e6;
        c.learning.hidden_units = 64;
        c.learning.replay_capacity = 20_000;
        c.learning.batch_size = 64;
        c.learning.discount = 0.5;
        c.learning.epsilon_decay = 0.99;
        c.learning.epsilon_end = 0.01;
        c.learning.epochs = 200;
        c.learning.frames_per_episode = 100;
        c.learning.arrival_norm = 30.0;
        c.learning.arrival_norm_urllc = 4.0;
        c.evaluation.frames = 200;
        c
    }

    pub fn num_users(&self) -> usize {
        self.system.embb_users + self.system.urllc_users
    }

    pub fn user_class(&self, user: usize) -> ServiceClass {
        if user < self.system.embb_users {
            ServiceClass::Embb
        } else {
            ServiceClass::Urllc
        }
    }

    pub fn embb_user_ids(&self) -> std::ops::Range<usize> {
        0..self.system.embb_users
    }

    pub fn urllc_user_ids(&self) -> std::ops::Range<usize> {
        self.system.embb_users..self.num_users()
    }

    pub fn packet_size_bits(&self, class: ServiceClass) -> u64 {
        match class {
            ServiceClass::Embb => self.traffic.packet_size_embb_bits,
            ServiceClass::Urllc => self.traffic.packet_size_urllc_bits,
        }
    }

    pub fn arrival_rate(&self, class: ServiceClass) -> f64 {
        match class {
            ServiceClass::Embb => self.traffic.arrival_rate_embb,
            ServiceClass::Urllc => self.traffic.arrival_rate_urllc,
        }
    }

    pub fn max_power_w(&self) -> f64 {
        dbm_to_watts(self.system.max_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.system.noise_power_dbm)
    }

    pub fn numerology(&self, slice: Slice) -> NumerologyConfig {
        self.numerologies[slice.index()]
    }

    /// R_0: aggregate eMBB bits demanded per frame.
    pub fn ref_rate_bits(&self) -> f64 {
        self.utility.ref_rate_bits.unwrap_or(
            self.system.embb_users as f64
                * self.qos.required_embb_rate_bps
                * self.system.frame_duration_s,
        )
    }

    /// Same scenario with both slices on 15 kHz subcarrier spacing
    /// (180 kHz RBs, 1 ms TTIs).
    pub fn with_fixed_numerology(&self) -> Self {
        let mut c = self.clone();
        let legacy = NumerologyConfig { rb_bandwidth_hz: 180e3, tti_duration_s: 1e-3 };
        c.numerologies = vec![legacy, legacy];
        c.qos.enforce_urllc_window = false;
        c
    }
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn is_integer_ratio(num: f64, den: f64) -> bool {
    let ratio = num / den;
    ratio >= 1.0 - DIVISIBILITY_TOL && (ratio - ratio.round()).abs() <= DIVISIBILITY_TOL * ratio.max(1.0)
}

/// Returns every violated invariant; an empty list means the config is usable.
pub fn validate_config(c: &SystemConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, rule: &str| {
        if !ok {
            out.push(ConfigViolation { field: field.into(), rule: rule.into() });
        }
    };
    let s = &c.system;
    check(s.num_rus >= 1, "system.num_rus", "at least one RU");
    check(s.embb_users + s.urllc_users >= 1, "system.embb_users", "at least one user");
    check(s.bandwidth_hz.is_finite() && s.bandwidth_hz > 0.0, "system.bandwidth_hz", "B > 0");
    check(s.alpha > 0.0 && s.alpha < 1.0, "system.alpha", "alpha in (0,1)");
    check(
        s.guard_band_hz >= 0.0 && s.alpha * s.bandwidth_hz - s.guard_band_hz > 0.0,
        "system.guard_band_hz",
        "alpha*B - B_G > 0",
    );
    check(s.frame_duration_s > 0.0, "system.frame_duration_s", "Delta > 0");
    check(s.cell_radius_m >= 0.0, "system.cell_radius_m", "radius >= 0");
    check(s.max_power_dbm.is_finite(), "system.max_power_dbm", "finite");
    check(s.noise_power_dbm.is_finite(), "system.noise_power_dbm", "finite");

    check(c.numerologies.len() == 2, "numerologies", "exactly two numerologies");
    for (i, n) in c.numerologies.iter().enumerate() {
        let field = format!("numerologies[{i}]");
        check(n.rb_bandwidth_hz > 0.0, &format!("{field}.rb_bandwidth_hz"), "beta_i > 0");
        check(n.tti_duration_s > 0.0, &format!("{field}.tti_duration_s"), "delta_i > 0");
        if n.tti_duration_s > 0.0 && s.frame_duration_s > 0.0 {
            check(
                is_integer_ratio(s.frame_duration_s, n.tti_duration_s),
                &format!("{field}.tti_duration_s"),
                "Delta multiple of delta_i",
            );
        }
    }
    if c.numerologies.len() == 2 && c.numerologies.iter().all(|n| n.tti_duration_s > 0.0) {
        let d1 = c.numerologies[0].tti_duration_s;
        let d2 = c.numerologies[1].tti_duration_s;
        check(
            is_integer_ratio(d1.max(d2), d1.min(d2)),
            "numerologies",
            "coarse TTI multiple of fine TTI",
        );
        let q = &c.qos;
        if q.enforce_urllc_window && q.latency_budget_s > 0.0 {
            check(
                (q.latency_budget_s / d2 + DIVISIBILITY_TOL).floor() >= 1.0,
                "qos.latency_budget_s",
                "floor(D_ur/delta_2) >= 1",
            );
        }
    }

    let q = &c.qos;
    check(
        q.latency_budget_s > 0.0 && q.latency_budget_s <= s.frame_duration_s,
        "qos.latency_budget_s",
        "0 < D_ur <= Delta",
    );
    check(q.queue_cap_bits > 0.0, "qos.queue_cap_bits", "q_max > 0");
    check(q.error_prob > 0.0 && q.error_prob < 1.0, "qos.error_prob", "P_e in (0,1)");
    check(q.urllc_snr_floor >= 0.0, "qos.urllc_snr_floor", "Gamma0 >= 0");
    check(q.required_embb_rate_bps >= 0.0, "qos.required_embb_rate_bps", ">= 0");
    check(q.urllc_overflow_divisor >= 1, "qos.urllc_overflow_divisor", ">= 1");

    let t = &c.traffic;
    check(t.packet_size_embb_bits > 0, "traffic.packet_size_embb_bits", "Z_em > 0");
    check(t.packet_size_urllc_bits > 0, "traffic.packet_size_urllc_bits", "Z_ur > 0");
    check(t.arrival_rate_embb >= 0.0, "traffic.arrival_rate_embb", ">= 0");
    check(t.arrival_rate_urllc >= 0.0, "traffic.arrival_rate_urllc", ">= 0");

    let u = &c.utility;
    check((0.0..=1.0).contains(&u.omega), "utility.omega", "omega in [0,1]");
    check(u.ref_queue_bits > 0.0, "utility.ref_queue_bits", "q0 > 0");
    check(u.ref_latency_s > 0.0, "utility.ref_latency_s", "tau0 > 0");
    check(c.ref_rate_bits() > 0.0, "utility.ref_rate_bits", "R0 > 0");
    check(u.penalty_value < 0.0, "utility.penalty_value", "negative");

    let l = &c.latency;
    check(
        [l.cu_proc_s, l.du_proc_s, l.ru_proc_s, l.mh_tx_s, l.fh_tx_s].iter().all(|v| *v >= 0.0),
        "latency",
        "all latency constants >= 0",
    );

    let ch = &c.channel;
    check(ch.min_distance_m > 0.0, "channel.min_distance_m", "d_min > 0");
    check(ch.gain_log10_min < ch.gain_log10_max, "channel.gain_log10_min", "min < max");

    let ln = &c.learning;
    check(ln.window >= 1, "learning.window", "W >= 1");
    check((0.0..1.0).contains(&ln.discount), "learning.discount", "gamma in [0,1)");
    check((0.0..=1.0).contains(&ln.soft_update_coeff), "learning.soft_update_coeff", "in [0,1]");
    check(ln.target_update_period >= 1, "learning.target_update_period", "C >= 1");
    check(ln.replay_capacity >= 1, "learning.replay_capacity", ">= 1");
    check(ln.batch_size >= 1, "learning.batch_size", ">= 1");
    check(ln.hidden_units >= 1, "learning.hidden_units", ">= 1");
    check(ln.learning_rate > 0.0, "learning.learning_rate", "> 0");
    check((0.0..=1.0).contains(&ln.epsilon_start), "learning.epsilon_start", "in [0,1]");
    check((0.0..=1.0).contains(&ln.epsilon_end), "learning.epsilon_end", "in [0,1]");
    check(ln.epsilon_decay > 0.0 && ln.epsilon_decay <= 1.0, "learning.epsilon_decay", "in (0,1]");
    check(ln.frames_per_episode >= 1, "learning.frames_per_episode", ">= 1");
    check(ln.arrival_norm > 0.0, "learning.arrival_norm", "> 0");
    check(ln.arrival_norm_urllc > 0.0, "learning.arrival_norm_urllc", "> 0");
    out
}

/// Per-slice dimensions of the RB grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGrid {
    pub bandwidth_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub tti_duration_s: f64,
    pub num_rbs: usize,
    pub num_ttis: usize,
}

impl SliceGrid {
    pub fn num_cells(&self) -> usize {
        self.num_rbs * self.num_ttis
    }
}

/// Time-frequency layout of one frame. The frame clock advances in fine
/// ticks of the shorter TTI; the coarser slice changes TTI every
/// `ticks_per_tti` ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct RbGrid {
    pub slices: [SliceGrid; 2],
    pub frame_duration_s: f64,
    pub tick_s: f64,
    pub num_ticks: usize,
}

impl RbGrid {
    pub fn slice(&self, s: Slice) -> &SliceGrid {
        &self.slices[s.index()]
    }

    pub fn ticks_per_tti(&self, s: Slice) -> usize {
        (self.slice(s).tti_duration_s / self.tick_s).round() as usize
    }

    /// Zero-based TTI of slice `s` that contains fine tick `tick`.
    pub fn tti_at_tick(&self, s: Slice, tick: usize) -> usize {
        tick / self.ticks_per_tti(s)
    }

    pub fn is_tti_start(&self, s: Slice, tick: usize) -> bool {
        tick % self.ticks_per_tti(s) == 0
    }
}

/// Splits B into the two slice bandwidths, (1-alpha)B and alpha*B - B_G.
pub fn split_bandwidth(bandwidth_hz: f64, alpha: f64, guard_band_hz: f64) -> (f64, f64) {
    let urllc_part = alpha * bandwidth_hz;
    (bandwidth_hz - urllc_part, urllc_part - guard_band_hz)
}

fn floor_ratio(num: f64, den: f64) -> usize {
    let r = num / den;
    (r + DIVISIBILITY_TOL * r.abs().max(1.0)).floor().max(0.0) as usize
}

/// Builds the RB grid of a validated config.
pub fn build_rb_grid(c: &SystemConfig) -> RbGrid {
    let (b1, b2) = split_bandwidth(c.system.bandwidth_hz, c.system.alpha, c.system.guard_band_hz);
    let frame = c.system.frame_duration_s;
    let mk = |bw: f64, n: &NumerologyConfig| SliceGrid {
        bandwidth_hz: bw,
        rb_bandwidth_hz: n.rb_bandwidth_hz,
        tti_duration_s: n.tti_duration_s,
        num_rbs: floor_ratio(bw, n.rb_bandwidth_hz),
        num_ttis: (frame / n.tti_duration_s).round() as usize,
    };
    let slices = [mk(b1, &c.numerologies[0]), mk(b2, &c.numerologies[1])];
    let tick_s = slices[0].tti_duration_s.min(slices[1].tti_duration_s);
    RbGrid {
        slices,
        frame_duration_s: frame,
        tick_s,
        num_ticks: slices[0].num_ttis.max(slices[1].num_ttis),
    }
}

/// Number of whole uRLLC-slice TTIs inside the latency budget.
pub fn urllc_window_ttis(c: &SystemConfig, grid: &RbGrid) -> usize {
    floor_ratio(c.qos.latency_budget_s, grid.slice(Slice::Urllc).tti_duration_s)
}

/// Number of leading eMBB-slice TTIs in which uRLLC overflow is counted.
pub fn overflow_window_ttis(c: &SystemConfig, grid: &RbGrid) -> usize {
    let r = c.qos.latency_budget_s / grid.slice(Slice::Embb).tti_duration_s;
    ((r - DIVISIBILITY_TOL).ceil().max(0.0) as usize).min(grid.slice(Slice::Embb).num_ttis)
}
