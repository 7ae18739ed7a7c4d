//! Independent reference computations for the integration suites.
#![allow(dead_code)]

use ndarray::Array2;
use oran_ts::ddqn::agent::mse_loss_grad;
use oran_ts::ddqn::Mlp;
use oran_ts::power::FillChannel;
use oran_ts::rng::{stream_rng, Stream};
use rand::Rng;

/// Upper Gaussian tail by composite Simpson quadrature of the density.
pub fn q_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_quadrature(-x);
    }
    let (a, b) = (x, x + 40.0);
    let n = 40_000;
    let h = (b - a) / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(b);
    for i in 1..n {
        let t = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(t);
    }
    s * h / 3.0
}

/// Bisection for the root of `q_quadrature(x) = p`.
pub fn q_inverse_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_quadrature(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Plain-loop forward pass and MSE on the taken choices.
pub fn mse_by_loops(net: &Mlp, states: &[Vec<f64>], actions: &[Vec<usize>], targets: &[Vec<f64>], num_choices: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for ((x, a), t) in states.iter().zip(actions).zip(targets) {
        let mut act = x.clone();
        for (li, l) in net.layers.iter().enumerate() {
            let mut next = vec![0.0; l.w.nrows()];
            for (o, v) in next.iter_mut().enumerate() {
                let mut z = l.b[o];
                for (i, xi) in act.iter().enumerate() {
                    z += l.w[[o, i]] * xi;
                }
                *v = if li + 1 < net.layers.len() { z.max(0.0) } else { z };
            }
            act = next;
        }
        for (h, &c) in a.iter().enumerate() {
            let e = act[h * num_choices + c] - t[h];
            total += e * e;
            count += 1.0;
        }
    }
    total / count
}

/// `sum_g min(cap_g, sum_{k in g} bits_k)`.
pub fn capped_objective(channels: &[FillChannel], caps: &[f64], p: &[f64]) -> f64 {
    let mut per = vec![0.0; caps.len()];
    for (c, &pk) in channels.iter().zip(p) {
        per[c.group] += c.weight * (1.0 + c.a * pk).log2();
    }
    per.iter().zip(caps).map(|(v, cap)| v.min(*cap)).sum()
}

/// Pairwise-exchange grid search over the budget simplex, an unused-power
/// slot included. Each move scans 10^4 points along the line between two
/// coordinates, then zooms in twice around the best. Ties on the capped
/// objective prefer the larger uncapped total so that surplus inside a
/// saturated group can later be released.
pub fn grid_search_power(channels: &[FillChannel], caps: &[f64], budget: f64) -> (f64, Vec<f64>) {
    let n = channels.len();
    let slack = n;
    let mut x = vec![budget / (n + 1) as f64; n + 1];
    let bits = |k: usize, p: f64| if k == slack { 0.0 } else { channels[k].weight * (1.0 + channels[k].a * p).log2() };
    let group = |k: usize| if k == slack { None } else { Some(channels[k].group) };
    let score = |per: &[f64]| -> (f64, f64) {
        (per.iter().zip(caps).map(|(v, c)| v.min(*c)).sum(), per.iter().sum())
    };
    let better = |a: (f64, f64), b: (f64, f64)| {
        let tol = 1e-13 * b.0.abs().max(1.0);
        a.0 > b.0 + tol || (a.0 >= b.0 - tol && a.1 > b.1 + 1e-12 * b.1.abs().max(1.0))
    };
    let totals = |x: &[f64]| {
        let mut per = vec![0.0; caps.len()];
        for k in 0..n {
            per[channels[k].group] += bits(k, x[k]);
        }
        per
    };
    for _sweep in 0..200 {
        let before = score(&totals(&x));
        for i in 0..=n {
            for j in 0..=n {
                let total = x[i] + x[j];
                if i == j || total <= 0.0 {
                    continue;
                }
                let mut base = totals(&x);
                if let Some(g) = group(i) {
                    base[g] -= bits(i, x[i]);
                }
                if let Some(g) = group(j) {
                    base[g] -= bits(j, x[j]);
                }
                let at = |t: f64| {
                    let mut per = base.clone();
                    if let Some(g) = group(i) {
                        per[g] += bits(i, t);
                    }
                    if let Some(g) = group(j) {
                        per[g] += bits(j, total - t);
                    }
                    score(&per)
                };
                let mut best_t = x[i];
                let mut best = at(best_t);
                let (mut lo, mut hi) = (0.0, total);
                for _zoom in 0..3 {
                    let steps = 10_000;
                    for k in 0..=steps {
                        let t = lo + (hi - lo) * k as f64 / steps as f64;
                        let v = at(t);
                        if better(v, best) {
                            best = v;
                            best_t = t;
                        }
                    }
                    let w = (hi - lo) / 1000.0;
                    lo = (best_t - w).max(0.0);
                    hi = (best_t + w).min(total);
                }
                x[i] = best_t;
                x[j] = total - best_t;
            }
        }
        if !better(score(&totals(&x)), before) {
            break;
        }
    }
    (capped_objective(channels, caps, &x[..n]), x[..n].to_vec())
}

pub struct Instance {
    pub channels: Vec<FillChannel>,
    pub caps: Vec<f64>,
    pub budget: f64,
}

/// One RU, 1 to 6 RBs spread over 1 to 3 users, caps on half of the draws.
pub fn random_instance(i: u64) -> Instance {
    let mut rng = stream_rng(4242, Stream::Oracle, i);
    let n = rng.random_range(1..=6);
    let groups = rng.random_range(1..=3usize.min(n));
    let channels: Vec<FillChannel> = (0..n)
        .map(|k| FillChannel {
            weight: [180.0, 360.0, 720.0][rng.random_range(0..3)] * 0.25,
            a: 10f64.powf(rng.random_range(-1.0..3.0)),
            group: if k < groups { k } else { rng.random_range(0..groups) },
        })
        .collect();
    let budget = 1.0;
    let capped = i % 2 == 1;
    let caps = (0..groups)
        .map(|g| {
            if capped {
                let full: f64 = channels.iter().filter(|c| c.group == g).map(|c| c.bits(budget)).sum();
                full * rng.random_range(0.05..0.9)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Instance { channels, caps, budget }
}

pub struct GradCase {
    pub net: Mlp,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<usize>>,
    pub targets: Vec<Vec<f64>>,
    pub num_choices: usize,
}

pub fn grad_case(i: u64) -> GradCase {
    let mut rng = stream_rng(6, Stream::Oracle, i);
    let d = rng.random_range(2..6);
    let heads = rng.random_range(1..4);
    let k = rng.random_range(2..5);
    let mut sizes = vec![d];
    sizes.extend((0..rng.random_range(1..3)).map(|_| rng.random_range(3..9)));
    sizes.push(heads * k);
    let mut net = Mlp::zeros(&sizes);
    let theta: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.assign_flat(&theta);
    let b = rng.random_range(1..6);
    let states = (0..b).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let actions = (0..b).map(|_| (0..heads).map(|_| rng.random_range(0..k)).collect()).collect();
    let targets = (0..b).map(|_| (0..heads).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    GradCase { net, states, actions, targets, num_choices: k }
}

/// Largest relative gap between backpropagated and central-difference
/// gradients, the loss evaluated by an independent loop implementation.
/// Biases are random so that no hidden unit sits exactly on its kink.
pub fn max_gradient_error(c: &GradCase) -> f64 {
    let x = Array2::from_shape_vec((c.states.len(), c.states[0].len()), c.states.concat()).unwrap();
    let (loss, grads) = mse_loss_grad(&c.net, x, &c.actions, &c.targets, c.num_choices);
    assert!((loss - mse_by_loops(&c.net, &c.states, &c.actions, &c.targets, c.num_choices)).abs() < 1e-12);
    let analytic = grads.flatten();
    let theta = c.net.flatten();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = c.net.clone();
    for (j, g) in analytic.iter().enumerate() {
        let mut t = theta.clone();
        t[j] += h;
        probe.assign_flat(&t);
        let up = mse_by_loops(&probe, &c.states, &c.actions, &c.targets, c.num_choices);
        t[j] -= 2.0 * h;
        probe.assign_flat(&t);
        let down = mse_by_loops(&probe, &c.states, &c.actions, &c.targets, c.num_choices);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
    }
    worst
}
