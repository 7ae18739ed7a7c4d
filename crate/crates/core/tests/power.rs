mod common;

use common::{capped_objective, grid_search_power, random_instance};
use oran_ts::power::{capped_water_filling, min_power_for_packet};
use oran_ts::rng::{stream_rng, Stream};
use rand::Rng;
use std::f64::consts::LOG2_E;

#[test]
fn water_filling_matches_grid_search() {
    for i in 0..24 {
        let inst = random_instance(i);
        let wf = capped_water_filling(&inst.channels, &inst.caps, inst.budget);
        assert!(wf.powers.iter().all(|&p| p >= 0.0));
        assert!(wf.powers.iter().sum::<f64>() <= inst.budget * (1.0 + 1e-12));
        let ours = capped_objective(&inst.channels, &inst.caps, &wf.powers);
        let (oracle, _) = grid_search_power(&inst.channels, &inst.caps, inst.budget);
        assert!((ours - oracle).abs() <= 1e-4 * oracle.max(1e-12), "instance {i}: {ours} vs {oracle}");
    }
}

#[test]
fn uncapped_solution_satisfies_kkt() {
    for i in (0..40).step_by(2) {
        let inst = random_instance(i);
        let wf = capped_water_filling(&inst.channels, &inst.caps, inst.budget);
        let marg: Vec<f64> = inst.channels.iter().zip(&wf.powers).map(|(c, p)| c.weight * c.a / (1.0 + c.a * p) * LOG2_E).collect();
        let mu = inst.channels.iter().zip(&wf.powers).zip(&marg).filter(|((_, p), _)| **p > 0.0).map(|(_, m)| *m).fold(f64::NAN, f64::max);
        for ((_, p), m) in inst.channels.iter().zip(&wf.powers).zip(&marg) {
            if *p > 0.0 {
                assert!((m - mu).abs() <= 1e-9 * mu, "instance {i}: active marginal {m} vs {mu}");
            } else {
                assert!(*m <= mu * (1.0 + 1e-9), "instance {i}: idle marginal {m} above {mu}");
            }
        }
        assert!((wf.powers.iter().sum::<f64>() - inst.budget).abs() < 1e-12);
        assert!(wf.kkt_residual < 1e-6, "instance {i}: {}", wf.kkt_residual);
    }
}

#[test]
fn packet_power_is_the_smallest_that_works() {
    let mut rng = stream_rng(7, Stream::Oracle, 0);
    let noise = 1e-14;
    for _ in 0..500 {
        let g = 10f64.powf(rng.random_range(-14.0..-9.0));
        let (beta, tti) = [(180e3, 1e-3), (720e3, 0.25e-3), (360e3, 0.5e-3)][rng.random_range(0..3)];
        let z = rng.random_range(32.0..1024.0);
        let floor = rng.random_range(0.5..5.0);
        let psi = rng.random_range(0.0..0.5);
        let works = |p: f64| {
            let snr = g * p / noise;
            snr >= floor * (1.0 - 1e-12) && beta * tti * ((1.0 + snr).log2() - LOG2_E * psi) >= z * (1.0 - 1e-12)
        };
        let p = min_power_for_packet(g, beta, tti, z, floor, noise, psi);
        assert!(works(p), "p = {p} does not carry the packet");
        assert!(!works(p * (1.0 - 1e-6)), "p = {p} is not minimal");
    }
}
