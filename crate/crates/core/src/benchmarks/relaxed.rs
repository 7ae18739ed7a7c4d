//! Continuous relaxation of one frame: every eMBB sub-flow may hold any
//! fraction of every cell and the full RU budget goes to eMBB. The mean
//! eMBB backlog is convex in the relaxed variables, so projected gradient
//! reaches its minimum and the linearisation at each iterate certifies a
//! lower bound.

use crate::channel::ChannelGains;
use crate::config::{RbGrid, Slice, SystemConfig};
use crate::flow_split::FlowSplit;
use crate::sim::{arrival_split, credit_at};

const PI_FLOOR: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
/// Served bits may exceed capacity by this much per tick after rounding.
const SERVE_SLACK_BITS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct RelaxedInput<'a> {
    pub gains: &'a ChannelGains,
    pub arrivals: &'a [u64],
    pub phi: &'a FlowSplit,
    /// eMBB backlog per sub-flow at frame start, indexed `ru * U_em + user`.
    pub embb_queues: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Certified lower bound on the frame utility of any integral assignment.
    pub objective_bound: f64,
    /// Certified lower bound on the mean eMBB backlog over ticks.
    pub queue_lower_bound: f64,
    pub latency_lower_bound_s: f64,
    /// Mean eMBB backlog at the best iterate.
    pub avg_queue_bits: f64,
    /// eMBB bits the best iterate serves over the frame.
    pub served_bits: f64,
    /// Served bits per `(ru, user)` in the usual sub-flow layout.
    pub served_per_flow: Vec<f64>,
    /// eMBB backlog per sub-flow at frame end, same layout as the input.
    pub embb_queues_end: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    slice: Slice,
    rb: usize,
    tti: usize,
}

struct Problem {
    num_flows: usize,
    cells: Vec<Cell>,
    /// Cell ids active at each tick.
    active: Vec<Vec<usize>>,
    num_rus: usize,
    embb: usize,
    /// `[flow][cell]` bits per tick per unit log2 argument.
    weight: Vec<f64>,
    /// `[flow][cell]` SNR at full budget.
    snr: Vec<f64>,
    arrivals: Vec<Vec<f64>>,
    start: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Point {
    pi: Vec<f64>,
    power: Vec<f64>,
}

struct Evaluation {
    value: f64,
    served: Vec<f64>,
    end: Vec<f64>,
}

impl Problem {
    fn power_index(&self, tick: usize, ru: usize, user: usize, a: usize) -> usize {
        let per_tick = self.active[0].len();
        ((tick * self.num_rus + ru) * self.embb + user) * per_tick + a
    }

    fn num_power(&self) -> usize {
        self.active.len() * self.num_rus * self.embb * self.active[0].len()
    }

    fn flow_cell(&self, j: usize, c: usize) -> usize {
        j * self.cells.len() + c
    }

    fn capacity(&self, x: &Point, j: usize, tick: usize) -> f64 {
        let (ru, user) = (j / self.embb, j % self.embb);
        let mut bits = 0.0;
        for (a, &c) in self.active[tick].iter().enumerate() {
            let k = self.flow_cell(j, c);
            let pi = x.pi[k];
            let p = x.power[self.power_index(tick, ru, user, a)];
            bits += pi * self.weight[k] * (1.0 + self.snr[k] * p / pi).log2();
        }
        bits
    }

    fn evaluate(&self, x: &Point) -> Evaluation {
        let ticks = self.active.len();
        let mut value = 0.0;
        let mut served = vec![0.0; self.num_flows];
        let mut end = vec![0.0; self.num_flows];
        for j in 0..self.num_flows {
            let mut q = self.start[j];
            for k in 0..ticks {
                let before = q + self.arrivals[k][j];
                q = (before - self.capacity(x, j, k)).max(0.0);
                served[j] += before - q;
                value += q;
            }
            end[j] = q;
        }
        Evaluation { value: value / ticks as f64, served, end }
    }

    fn gradient(&self, x: &Point) -> Point {
        let ticks = self.active.len();
        let mut g = Point { pi: vec![0.0; x.pi.len()], power: vec![0.0; x.power.len()] };
        let ln2 = std::f64::consts::LN_2;
        for j in 0..self.num_flows {
            let (ru, user) = (j / self.embb, j % self.embb);
            let mut open = vec![false; ticks];
            let mut q = self.start[j];
            for k in 0..ticks {
                let z = q + self.arrivals[k][j] - self.capacity(x, j, k);
                open[k] = z > 0.0;
                q = z.max(0.0);
            }
            let mut lambda = 0.0;
            for k in (0..ticks).rev() {
                let next_open = k + 1 < ticks && open[k + 1];
                lambda = 1.0 / ticks as f64 + if next_open { lambda } else { 0.0 };
                if !open[k] {
                    continue;
                }
                let d_cap = -lambda;
                for (a, &c) in self.active[k].iter().enumerate() {
                    let kc = self.flow_cell(j, c);
                    let kp = self.power_index(k, ru, user, a);
                    let (pi, w, s) = (x.pi[kc], self.weight[kc], self.snr[kc]);
                    let t = s * x.power[kp] / pi;
                    g.pi[kc] += d_cap * w * ((1.0 + t).log2() - t / ((1.0 + t) * ln2));
                    g.power[kp] += d_cap * w * s / ((1.0 + t) * ln2);
                }
            }
        }
        g
    }

    fn pi_groups(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.cells.len()).map(move |c| (0..self.num_flows).map(|j| self.flow_cell(j, c)).collect())
    }

    fn power_groups(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let per_tick = self.active[0].len();
        (0..self.active.len()).flat_map(move |k| {
            (0..self.num_rus).map(move |ru| {
                (0..self.embb)
                    .flat_map(|user| (0..per_tick).map(move |a| (user, a)))
                    .map(|(user, a)| self.power_index(k, ru, user, a))
                    .collect()
            })
        })
    }

    fn project(&self, x: &mut Point) {
        for idx in self.pi_groups().collect::<Vec<_>>() {
            project_capped(&mut x.pi, &idx, PI_FLOOR, 1.0, 1.0);
        }
        for idx in self.power_groups().collect::<Vec<_>>() {
            project_capped(&mut x.power, &idx, 0.0, f64::INFINITY, 1.0);
        }
    }

    /// `min over the unrestricted relaxed set of <g, y>`: per cell all of it
    /// to the most negative flow, per RU and tick the whole budget likewise.
    fn linear_minimum(&self, g: &Point) -> f64 {
        let mut total = 0.0;
        for idx in self.pi_groups() {
            total += idx.iter().map(|&k| g.pi[k]).fold(0.0, f64::min);
        }
        for idx in self.power_groups() {
            total += idx.iter().map(|&k| g.power[k]).fold(0.0, f64::min);
        }
        total
    }
}

fn dot(a: &Point, b: &Point) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    d(&a.pi, &b.pi) + d(&a.power, &b.power)
}

/// Euclidean projection of `v[idx]` onto `{lo <= y <= hi, sum y <= cap}`.
pub fn project_capped(v: &mut [f64], idx: &[usize], lo: f64, hi: f64, cap: f64) {
    let clipped = |tau: f64, x: f64| (x - tau).clamp(lo, hi);
    let sum = |tau: f64, v: &[f64]| idx.iter().map(|&k| clipped(tau, v[k])).sum::<f64>();
    if sum(0.0, v) <= cap {
        idx.iter().for_each(|&k| v[k] = clipped(0.0, v[k]));
        return;
    }
    let (mut a, mut b) = (0.0, idx.iter().map(|&k| v[k]).fold(f64::NEG_INFINITY, f64::max) - lo);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if sum(mid, v) > cap {
            a = mid;
        } else {
            b = mid;
        }
    }
    idx.iter().for_each(|&k| v[k] = clipped(b, v[k]));
}

fn build(config: &SystemConfig, grid: &RbGrid, input: &RelaxedInput) -> Problem {
    let (nm, nu, ne) = (config.system.num_rus, config.num_users(), config.system.embb_users);
    let cells: Vec<Cell> = Slice::ALL
        .iter()
        .flat_map(|&slice| {
            let sg = grid.slice(slice);
            (0..sg.num_ttis).flat_map(move |tti| (0..sg.num_rbs).map(move |rb| Cell { slice, rb, tti }))
        })
        .collect();
    let active: Vec<Vec<usize>> = (0..grid.num_ticks)
        .map(|k| {
            (0..cells.len())
                .filter(|&c| grid.tti_at_tick(cells[c].slice, k) == cells[c].tti)
                .collect()
        })
        .collect();
    let budget = config.max_power_w();
    let noise = config.noise_power_w();
    let num_flows = nm * ne;
    let mut weight = vec![0.0; num_flows * cells.len()];
    let mut snr = vec![0.0; num_flows * cells.len()];
    for j in 0..num_flows {
        let (ru, user) = (j / ne, j % ne);
        for (c, cell) in cells.iter().enumerate() {
            let k = j * cells.len() + c;
            weight[k] = grid.slice(cell.slice).rb_bandwidth_hz * grid.tick_s;
            snr[k] = input.gains.get(cell.slice, ru, user, cell.rb, cell.tti) * budget / noise;
        }
    }
    let totals = arrival_split(config, input.phi, input.arrivals);
    let arrivals = (0..grid.num_ticks)
        .map(|k| {
            let now = credit_at(config, grid, k, &totals);
            (0..num_flows).map(|j| now[(j / ne) * nu + j % ne] as f64).collect()
        })
        .collect();
    Problem { num_flows, cells, active, num_rus: nm, embb: ne, weight, snr, arrivals, start: input.embb_queues.to_vec() }
}

/// Lower bound on uRLLC worst latency for any assignment that schedules
/// every uRLLC user with arrivals.
pub fn latency_lower_bound(config: &SystemConfig, grid: &RbGrid, arrivals: &[u64]) -> f64 {
    if config.urllc_user_ids().any(|u| arrivals[u] > 0) {
        let d = grid.slice(Slice::Embb).tti_duration_s.min(grid.slice(Slice::Urllc).tti_duration_s);
        config.latency.total() + d
    } else {
        0.0
    }
}

/// Minimises the relaxed frame backlog and certifies a lower bound on it.
/// Tail drops at the RU cap are not modelled, so the bound assumes none.
pub fn relaxed_frame_bound(
    config: &SystemConfig,
    grid: &RbGrid,
    input: &RelaxedInput,
    max_iters: usize,
    tol: f64,
) -> RelaxedSolution {
    let prob = build(config, grid, input);
    let n_pi = prob.num_flows * prob.cells.len();
    let share = 1.0 / prob.num_flows.max(1) as f64;
    let per_group = (prob.embb * prob.active.first().map_or(0, |a| a.len())).max(1) as f64;
    let mut x = Point { pi: vec![share; n_pi], power: vec![1.0 / per_group; prob.num_power()] };
    prob.project(&mut x);
    let mut eval = prob.evaluate(&x);
    let mut best_lb = 0.0_f64;
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters && prob.num_flows > 0 && !prob.cells.is_empty() {
        iterations += 1;
        let g = prob.gradient(&x);
        best_lb = best_lb.max(eval.value - dot(&g, &x) + prob.linear_minimum(&g));
        let mut accepted = None;
        let mut t = step * 2.0;
        for _ in 0..60 {
            let mut y = Point {
                pi: x.pi.iter().zip(&g.pi).map(|(a, b)| a - t * b).collect(),
                power: x.power.iter().zip(&g.power).map(|(a, b)| a - t * b).collect(),
            };
            prob.project(&mut y);
            let diff = Point {
                pi: y.pi.iter().zip(&x.pi).map(|(a, b)| a - b).collect(),
                power: y.power.iter().zip(&x.power).map(|(a, b)| a - b).collect(),
            };
            let e = prob.evaluate(&y);
            if e.value <= eval.value + ARMIJO * dot(&g, &diff) {
                accepted = Some((y, e));
                break;
            }
            t *= 0.5;
        }
        let Some((y, e)) = accepted else {
            converged = true;
            break;
        };
        step = t;
        let change = (eval.value - e.value).abs();
        x = y;
        eval = e;
        if change <= tol * eval.value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let g = prob.gradient(&x);
    best_lb = best_lb.max(eval.value - dot(&g, &x) + prob.linear_minimum(&g));
    let slack = SERVE_SLACK_BITS * (prob.num_flows * grid.num_ticks) as f64;
    let queue_lower_bound = (best_lb.min(eval.value) - slack).max(0.0);
    let latency_lower_bound_s = latency_lower_bound(config, grid, input.arrivals);
    let u = &config.utility;
    let objective_bound =
        u.omega * queue_lower_bound / u.ref_queue_bits + (1.0 - u.omega) * latency_lower_bound_s / u.ref_latency_s;
    let (nu, ne) = (config.num_users(), prob.embb);
    let mut served_per_flow = vec![0.0; config.system.num_rus * nu];
    for (j, s) in eval.served.iter().enumerate() {
        served_per_flow[(j / ne) * nu + j % ne] = *s;
    }
    RelaxedSolution {
        objective_bound,
        queue_lower_bound,
        latency_lower_bound_s,
        avg_queue_bits: eval.value,
        served_bits: eval.served.iter().sum(),
        served_per_flow,
        embb_queues_end: eval.end,
        iterations,
        converged,
    }
}
