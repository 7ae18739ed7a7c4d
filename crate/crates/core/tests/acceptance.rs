//! Acceptance criteria, one status line each. `ACCEPTANCE_ONLY=4,9` runs a
//! subset; the process exits non-zero when any selected criterion fails.

mod common;

use common::{capped_objective, grid_search_power, grad_case, max_gradient_error, q_inverse_bisection, q_quadrature, random_instance};
use oran_ts::benchmarks::{compare_on, run_learned, score_assignment, tiny_config, tiny_instance, Heuristic, LearnedRun, SchemeId};
use oran_ts::channel::{scenario_topology, GeneratedTraces, TracePhase, TraceSource};
use oran_ts::config::{build_rb_grid, urllc_window_ttis, ServiceClass, Slice, SystemConfig};
use oran_ts::channel::FrameTrace;
use oran_ts::config::Exploration;
use oran_ts::ddqn::agent::{greedy_choices, select_action};
use oran_ts::ddqn::{assignment_from_choices, check_constraints, AgentPair};
use oran_ts::rates::RbAssignment;
use oran_ts::io::{checkpoint::encode_checkpoint, write_metrics};
use oran_ts::power::capped_water_filling;
use oran_ts::rates::{fbl_penalty, inverse_q};
use oran_ts::rng::{stream_rng, Stream};
use oran_ts::sim::{run_frame, train, AssignmentPolicy, GreedyAgents, MetricsSeries, PhiMode, PolicyInput, World};
use oran_ts::slicing::{quotas, quotas_from, urllc_capacity};
use rand::Rng;
use std::collections::HashMap;
use std::time::Instant;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const SWEEP_DBM: [f64; 7] = [10.0, 16.0, 22.0, 28.0, 34.0, 40.0, 46.0];
const SWEEP_SEEDS: [u64; 2] = [0, 1];
const LIGHT_LOAD_DBM: f64 = 46.0;
const LIGHT_LOAD_ARRIVALS: f64 = 5.0;
const EXPLORATION_SAMPLES: usize = 20;
const EXPLORATION_SAMPLE_EPSILON: f64 = 0.2;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn parallel_map<J: Sync, T: Send>(jobs: &[J], f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<T>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker finished")).collect()
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn numeric_kernels() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut p = 1e-6;
    let mut n = 0;
    while p <= 0.5 + 1e-15 {
        let x = inverse_q(p).expect("p in (0,1)");
        worst = worst.max((q_quadrature(x) - p).abs());
        n += 1;
        p = if p * 1.25 > 0.5 && p < 0.5 { 0.5 } else { p * 1.25 };
    }
    let psi = fbl_penalty(1e-3, 1e-3, 180e3).expect("valid");
    let oracle = q_inverse_bisection(1e-3) / (1e-3f64 * 180e3).sqrt();
    let pass = worst <= 1e-9 && (psi - 0.23033).abs() <= 1e-4 && (psi - oracle).abs() <= 1e-4;
    verdict(pass, format!("{n} points, max |Q(inverse_q(p)) - p| = {worst:.2e}; psi = {psi:.6}, bisection oracle {oracle:.6}"))
}

fn gradient_correctness() -> Verdict {
    let worst = (0..20).map(|i| max_gradient_error(&grad_case(100 + i))).fold(0.0, f64::max);
    verdict(worst < 1e-4, format!("20 networks, max relative error {worst:.2e}"))
}

fn water_filling_optimality() -> Verdict {
    let mut worst_gap: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    for i in 0..100 {
        let inst = random_instance(1000 + i);
        let wf = capped_water_filling(&inst.channels, &inst.caps, inst.budget);
        let ours = capped_objective(&inst.channels, &inst.caps, &wf.powers);
        let (oracle, _) = grid_search_power(&inst.channels, &inst.caps, inst.budget);
        worst_gap = worst_gap.max((ours - oracle).abs() / oracle.max(1e-12));
        if inst.caps.iter().all(|c| c.is_infinite()) {
            worst_kkt = worst_kkt.max(wf.kkt_residual);
        }
    }
    verdict(
        worst_gap <= 1e-4 && worst_kkt < 1e-6,
        format!("100 instances, max relative gap to grid search {worst_gap:.2e}, max uncapped KKT residual {worst_kkt:.2e}"),
    )
}

/// Greedy choices of the trained agents plus per-head epsilon-greedy
/// samples around them, all evaluated as the first frame of an episode.
fn learned_assignments(config: &SystemConfig, agents: &AgentPair, trace: &FrameTrace, seed: u64) -> Vec<RbAssignment> {
    let world = World::new(config);
    let phi = world.flow_split(PhiMode::Uniform);
    let q = world.quotas(trace);
    let states = world.observe(trace, &phi, &q);
    let greedy = [0, 1].map(|i| greedy_choices(&agents.agents[i].q_values(&states[i]), agents.agents[i].spec.num_choices));
    let mut out = vec![assignment_from_choices(&greedy, config, &world.grid)];
    let mut rng = stream_rng(seed, Stream::Oracle, 1);
    let noisy = agents.agents.clone().map(|mut a| {
        a.epsilon = EXPLORATION_SAMPLE_EPSILON;
        a
    });
    for _ in 0..EXPLORATION_SAMPLES {
        let choices = [0, 1].map(|i| select_action(&noisy[i], &states[i], Exploration::PerHead, &mut rng));
        out.push(assignment_from_choices(&choices, config, &world.grid));
    }
    out
}

fn oracle_ordering() -> Verdict {
    let shapes = [(1, 1), (1, 2), (2, 1), (2, 2)];
    let trained: Vec<AgentPair> = parallel_map(&shapes, |&(f1, f2)| {
        let mut c = tiny_config(f1, f2);
        c.learning.frames_per_episode = 20;
        train(&c, PhiMode::Estimated, 7, c.learning.epochs).agents
    });
    let agents: HashMap<(usize, usize), &AgentPair> = shapes.iter().copied().zip(&trained).collect();
    let mut bad = Vec::new();
    let (mut heur_checked, mut learned_checked, mut greedy_checked) = (0, 0, 0);
    let mut tightest: f64 = f64::INFINITY;
    for i in 0..50 {
        let (c, trace) = tiny_instance(11, i);
        let g = build_rb_grid(&c);
        let cmp = compare_on(&c, &trace).expect("tiny search space");
        let Some(bf) = cmp.brute_force.as_ref() else {
            bad.push(format!("{i}: no feasible assignment"));
            continue;
        };
        if cmp.relaxed_bound > bf.objective {
            bad.push(format!("{i}: relaxed {} > brute force {}", cmp.relaxed_bound, bf.objective));
        }
        tightest = tightest.min(bf.objective - cmp.relaxed_bound);
        if cmp.heuristic_feasible {
            heur_checked += 1;
            if cmp.heuristic_objective < bf.objective {
                bad.push(format!("{i}: heuristic {} < brute force {}", cmp.heuristic_objective, bf.objective));
            }
        }
        let shape = (g.slice(Slice::Embb).num_rbs, g.slice(Slice::Urllc).num_rbs);
        let q = quotas(&trace.arrivals.packets, &g, &c);
        for (k, pi) in learned_assignments(&c, agents[&shape], &trace, i as u64).iter().enumerate() {
            if check_constraints(pi, &q, &trace.arrivals.packets, &g, &c).is_empty() {
                learned_checked += 1;
                greedy_checked += usize::from(k == 0);
                let obj = score_assignment(&c, &trace, pi).utility;
                if obj < bf.objective {
                    bad.push(format!("{i}: learned {obj} < brute force {}", bf.objective));
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "50 instances, {heur_checked} feasible heuristic and {learned_checked} feasible learned assignments ({greedy_checked} greedy, rest epsilon = {EXPLORATION_SAMPLE_EPSILON} samples) compared, smallest brute-force minus bound gap {tightest:.2e}{}",
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join(", ")) }
        ),
    )
}

struct Trained {
    runs: HashMap<(SchemeId, u64), LearnedRun>,
}

fn train_desk() -> Trained {
    let config = SystemConfig::desk();
    let jobs: Vec<(SchemeId, u64)> = [SchemeId::Proposed, SchemeId::UniformPhi, SchemeId::FixedNumerology]
        .iter()
        .flat_map(|&s| SEEDS.iter().map(move |&seed| (s, seed)))
        .collect();
    let runs = parallel_map(&jobs, |&(s, seed)| run_learned(&config, s, seed, config.learning.epochs));
    Trained { runs: jobs.into_iter().zip(runs).collect() }
}

fn learning_sanity(t: &Trained) -> Verdict {
    let mut rises = Vec::new();
    for &seed in &SEEDS[..4] {
        let curve = &t.runs[&(SchemeId::Proposed, seed)].learning_curve;
        let n = (curve.len() / 10).max(1);
        let first = mean(curve[..n].iter().copied());
        let last = mean(curve[curve.len() - n..].iter().copied());
        let range = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max) - curve.iter().copied().fold(f64::INFINITY, f64::min);
        rises.push((seed, first, last, if range > 0.0 { (last - first) / range } else { 0.0 }));
    }
    let ok = rises.iter().filter(|r| r.3 >= 0.2).count();
    let detail = rises.iter().map(|(s, f, l, r)| format!("seed {s}: {f:.3} -> {l:.3} ({:.0}% of range)", r * 100.0)).collect::<Vec<_>>().join(", ");
    verdict(ok >= 3, format!("{ok}/4 seeds rise by at least 20%; {detail}"))
}

fn mean_throughput(t: &Trained, s: SchemeId) -> f64 {
    mean(SEEDS.iter().map(|&seed| t.runs[&(s, seed)].series.aggregate().mean_throughput_bps))
}

fn scheme_ordering(t: &Trained) -> Verdict {
    let p = mean_throughput(t, SchemeId::Proposed);
    let u = mean_throughput(t, SchemeId::UniformPhi);
    let f = mean_throughput(t, SchemeId::FixedNumerology);
    verdict(
        p >= u && p >= 1.10 * f,
        format!(
            "{} dBm, 5 paired seeds: proposed {:.4e} b/s, uniform-phi {:.4e} ({:+.2}%), fixed numerology {:.4e} ({:+.2}%)",
            SystemConfig::desk().system.max_power_dbm,
            p,
            u,
            (p / u - 1.0) * 100.0,
            f,
            (p / f - 1.0) * 100.0
        ),
    )
}

fn latency_guarantee(t: &Trained, sweep: &Sweep, light: &[MetricsSeries]) -> Verdict {
    let budget = SystemConfig::desk().qos.latency_budget_s;
    let desk = SEEDS.iter().map(|&seed| &t.runs[&(SchemeId::Proposed, seed)].series);
    let mut parts = Vec::new();
    let mut late_total = 0;
    for (name, series) in [
        ("desk", desk.collect::<Vec<_>>()),
        ("sweep", sweep.runs.iter().map(|(_, s)| s).collect()),
        ("light load", light.iter().collect()),
    ] {
        let (mut frames, mut clean, mut late) = (0, 0, 0);
        for r in series.iter().flat_map(|s| &s.records) {
            frames += 1;
            if r.feasible {
                clean += 1;
                late += usize::from(r.worst_urllc_latency_s > budget);
            }
        }
        late_total += late;
        parts.push(format!("{name}: {clean} of {frames} frames non-penalized, {late} above budget"));
    }
    verdict(late_total == 0, format!("budget {budget} s; {}", parts.join("; ")))
}

fn inversions(xs: &[f64], increasing: bool) -> usize {
    xs.windows(2).filter(|w| if increasing { w[1] < w[0] } else { w[1] > w[0] }).count()
}

/// Proposed-scheme evaluation series per `(p_max_dbm, seed)` of the sweep.
struct Sweep {
    runs: Vec<((f64, u64), MetricsSeries)>,
}

fn power_sweep() -> Sweep {
    let jobs: Vec<(f64, u64)> = SWEEP_DBM.iter().flat_map(|&p| SWEEP_SEEDS.iter().map(move |&s| (p, s))).collect();
    let series = parallel_map(&jobs, |&(p, seed)| {
        let mut c = SystemConfig::desk();
        c.system.max_power_dbm = p;
        run_learned(&c, SchemeId::Proposed, seed, c.learning.epochs).series
    });
    Sweep { runs: jobs.into_iter().zip(series).collect() }
}

/// Lightly loaded, high-power runs where non-penalized frames are common.
fn light_load_runs() -> Vec<MetricsSeries> {
    parallel_map(&SWEEP_SEEDS, |&seed| {
        let mut c = SystemConfig::desk();
        c.system.max_power_dbm = LIGHT_LOAD_DBM;
        c.traffic.arrival_rate_embb = LIGHT_LOAD_ARRIVALS;
        run_learned(&c, SchemeId::Proposed, seed, c.learning.epochs).series
    })
}

fn power_monotonicity(sweep: &Sweep) -> Verdict {
    let per_power = |f: fn(&oran_ts::sim::MetricsAggregate) -> f64| -> Vec<f64> {
        SWEEP_DBM
            .iter()
            .map(|&p| mean(sweep.runs.iter().filter(|((q, _), _)| *q == p).map(|(_, s)| f(&s.aggregate()))))
            .collect()
    };
    let tp = per_power(|a| a.mean_throughput_bps);
    let qs = per_power(|a| a.mean_queue_bits);
    let (ti, qi) = (inversions(&tp, true), inversions(&qs, false));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" ");
    verdict(
        ti <= 1 && qi <= 1,
        format!(
            "{:?} dBm over seeds {:?}: throughput [{}] with {ti} inversions, queue [{}] with {qi} inversions",
            SWEEP_DBM,
            SWEEP_SEEDS,
            fmt(&tp),
            fmt(&qs)
        ),
    )
}

fn packet_bits(c: &SystemConfig, u: usize) -> u64 {
    match c.user_class(u) {
        ServiceClass::Embb => c.traffic.packet_size_embb_bits,
        ServiceClass::Urllc => c.traffic.packet_size_urllc_bits,
    }
}

/// Arrived bits from the raw traces against served, dropped and final
/// backlog bits from the outcomes.
fn episode_balances(c: &SystemConfig, policy: &mut dyn AssignmentPolicy, seed: u64, frames: usize) -> bool {
    let traces = GeneratedTraces::new(c, scenario_topology(c, seed), seed, TracePhase::Eval);
    let mut world = World::new(c);
    let (mut arrived, mut out_bits) = (0u64, 0u64);
    for t in 0..frames {
        let trace = traces.frame(t);
        arrived += trace.arrivals.packets.iter().enumerate().map(|(u, &n)| n * packet_bits(c, u)).sum::<u64>();
        let phi = world.flow_split(PhiMode::Estimated);
        let q = world.quotas(&trace);
        let states = world.observe(&trace, &phi, &q);
        let pi = policy.assign(&PolicyInput { world: &world, trace: &trace, phi: &phi, quotas: &q, states: &states });
        let o = run_frame(&mut world, &trace, &phi, &pi);
        out_bits += o.served_bits.iter().sum::<u64>() + o.dropped_bits;
    }
    arrived == out_bits + world.queues.total() && world.conserves_bits()
}

fn conservation_and_determinism(t: &Trained) -> Verdict {
    let desk = SystemConfig::desk();
    let mut dropping = desk.clone();
    dropping.system.max_power_dbm = 0.0;
    dropping.qos.drop_on_overflow = true;
    let mut balanced = 0;
    let mut total = 0;
    for (c, seed) in [(&desk, 0), (&dropping, 1)] {
        total += 2;
        balanced += usize::from(episode_balances(c, &mut Heuristic, seed, c.learning.frames_per_episode));
        let agents = &t.runs[&(SchemeId::Proposed, seed)].agents;
        balanced += usize::from(episode_balances(c, &mut GreedyAgents(agents), seed, c.learning.frames_per_episode));
    }

    let mut short = desk.clone();
    short.learning.frames_per_episode = 20;
    short.evaluation.frames = 30;
    let bytes = |run: &LearnedRun| {
        let mut csv = Vec::new();
        write_metrics(&run.series, &mut csv).expect("in-memory write");
        (csv, encode_checkpoint(&run.agents.agents))
    };
    let a = bytes(&run_learned(&short, SchemeId::Proposed, 9, 5));
    let b = bytes(&run_learned(&short, SchemeId::Proposed, 9, 5));
    let identical = a == b;
    verdict(
        balanced == total && identical,
        format!(
            "{balanced}/{total} episodes balance exactly; repeated (config, seed) runs give {} metrics and checkpoint bytes ({} + {} bytes)",
            if identical { "identical" } else { "DIFFERENT" },
            a.0.len(),
            a.1.len()
        ),
    )
}

fn quota_formulas() -> Verdict {
    let mut rng = stream_rng(10, Stream::Oracle, 0);
    let mut bad = 0;
    let mut structural = 0;
    for i in 0..10_000 {
        let mut c = SystemConfig::desk();
        c.system.urllc_users = rng.random_range(1..5);
        c.system.embb_users = rng.random_range(1..6);
        c.numerologies[1].tti_duration_s = [0.125e-3, 0.25e-3, 0.5e-3][rng.random_range(0..3)];
        c.qos.latency_budget_s = [0.25e-3, 0.5e-3, 1e-3][rng.random_range(0..3)];
        c.qos.urllc_overflow_divisor = rng.random_range(1..4);
        let g = build_rb_grid(&c);
        let arrivals: Vec<u64> = (0..c.num_users()).map(|_| rng.random_range(0..12)).collect();
        let q = quotas(&arrivals, &g, &c);
        let cells = g.slice(Slice::Urllc).num_cells() as u64;
        let lambda: Vec<u64> = c.urllc_user_ids().map(|u| arrivals[u]).collect();
        let omega = urllc_capacity(&g, urllc_window_ttis(&c, &g));
        let again = quotas_from(&lambda, omega, cells, c.system.embb_users, c.qos.urllc_overflow_divisor);
        structural += usize::from(q != again);
        let pointwise = lambda.iter().zip(&q.omega_u).all(|(l, o)| l <= o);
        if (pointwise && q.e_ur.iter().any(|&e| e != 0)) || q.e_em * c.system.embb_users as u64 > cells {
            bad += 1;
        }
        if i % 2 == 0 {
            let omega = rng.random_range(0..40);
            let cells = rng.random_range(0..200);
            let ne = rng.random_range(1..8);
            let lam: Vec<u64> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..20)).collect();
            let q = quotas_from(&lam, omega, cells, ne, rng.random_range(1..4));
            let pointwise = lam.iter().zip(&q.omega_u).all(|(l, o)| l <= o);
            if (pointwise && q.e_ur.iter().any(|&e| e != 0)) || q.e_em * ne as u64 > cells {
                bad += 1;
            }
        }
    }
    verdict(bad == 0 && structural == 0, format!("10^4 grid-derived and 5000 free-form inputs, {bad} violations, {structural} mismatches"))
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let names = [
        "numeric kernels",
        "gradient correctness",
        "water-filling optimality",
        "oracle ordering",
        "learning sanity",
        "scheme ordering",
        "latency guarantee",
        "power-budget monotonicity",
        "conservation and determinism",
        "quota formulas",
    ];
    let needs_training = [5, 6, 7, 9].iter().any(|&n| wanted(n));
    let started = Instant::now();
    let trained = needs_training.then(train_desk);
    let sweep = [7, 8].iter().any(|&n| wanted(n)).then(power_sweep);
    let light = wanted(7).then(light_load_runs);
    println!("shared training runs: {:.0} s", started.elapsed().as_secs_f64());
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if !wanted(n) {
            println!("criterion {n:>2} {name}: SKIP");
            continue;
        }
        let t0 = Instant::now();
        let t = trained.as_ref();
        let v = match n {
            1 => numeric_kernels(),
            2 => gradient_correctness(),
            3 => water_filling_optimality(),
            4 => oracle_ordering(),
            5 => learning_sanity(t.expect("trained")),
            6 => scheme_ordering(t.expect("trained")),
            7 => latency_guarantee(t.expect("trained"), sweep.as_ref().expect("swept"), light.as_deref().expect("trained")),
            8 => power_monotonicity(sweep.as_ref().expect("swept")),
            9 => conservation_and_determinism(t.expect("trained")),
            _ => quota_formulas(),
        };
        failed += usize::from(!v.pass);
        println!(
            "criterion {n:>2} {name}: {} ({:.1} s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {failed} failed, total {:.0} s", started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
