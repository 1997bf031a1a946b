use std::collections::HashSet;

use super::*;
use crate::{netmodel, strongcons, twominer};
use proptest::prelude::*;

fn two(c1: f64, c2: f64, a12: f64, a21: f64) -> NetworkScenario {
    NetworkScenario::two_miner(c1, c2, a12, a21).unwrap()
}

#[test]
fn idle_miners() {
    let r = run(&SimConfig::new(NetworkScenario::complete(vec![0.0; 3], 0.4).unwrap(), 500, 1)).unwrap();
    assert_eq!(r.capacity_estimate, 0.0);
    assert_eq!(r.stale_ratio, 0.0);
    assert_eq!(r.total_mined, 0);
    assert!(r.gamma_empirical.is_empty());
}

#[test]
fn saturated_miners() {
    let r = run(&SimConfig::new(two(1.0, 1.0, 1.0, 1.0), 1000, 9)).unwrap();
    assert_eq!(r.capacity_estimate, 1.0);
    assert_eq!(r.stale_ratio, 0.5);
    assert_eq!(r.total_admitted, 1000);
    assert_eq!(r.total_mined, 2000);
}

#[test]
fn single_miner_admits_everything() {
    let s = NetworkScenario::new(vec![0.3], vec![vec![0.0]]).unwrap();
    let r = run(&SimConfig::new(s, 20_000, 3)).unwrap();
    assert_eq!(r.total_admitted, r.total_mined);
    assert_eq!(r.stale_ratio, 0.0);
    assert_eq!(r.gamma_empirical, vec![1.0]);
}

#[test]
fn two_miner_capacity_near_closed_form() {
    let p = twominer::TwoMinerParams::new(0.2, 0.4, 0.2, 0.8).unwrap();
    let exact = twominer::solve(&p).unwrap().r2;
    let r = run(&SimConfig::new(two(0.2, 0.4, 0.2, 0.8), 200_000, 11)).unwrap();
    let z = (r.capacity_estimate - exact).abs() / r.capacity_stderr;
    assert!(z < 3.0, "{} vs {exact} (z = {z})", r.capacity_estimate);
}

#[test]
fn consistency_matches_eta() {
    let (c1, c2) = (0.3, 0.2);
    let mut cfg = SimConfig::new(two(c1, c2, 1.0, 1.0), 200_000, 5);
    cfg.track_pairs = true;
    let r = run(&cfg).unwrap();
    let eta = strongcons::eta(c1, c2).unwrap();
    let got = r.consistency_fraction.unwrap();
    assert!((got - eta).abs() < 3.0 * r.consistency_stderr.unwrap(), "{got} vs {eta}");
    let t10 = strongcons::tau(1, 0, c1, c2).unwrap();
    let p = r.pair(1, 0).unwrap();
    assert!((p.frequency - t10).abs() < 3.0 * p.stderr, "{p:?} vs {t10}");
    assert_eq!(r.pair(2, 0).unwrap().frequency, 0.0);
}

#[test]
fn determinism_and_replications() {
    let cfg = SimConfig::new(NetworkScenario::complete(vec![0.1, 0.2, 0.15], 0.3).unwrap(), 5_000, 42);
    let a = run(&cfg).unwrap();
    assert_eq!(a, run(&cfg).unwrap());
    assert_eq!(a, run_replications(&cfg, 1).unwrap());
    let r1 = run_replications(&cfg, 4).unwrap();
    let r2 = run_replications(&cfg, 4).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.replications, 4);
    let third = Simulation::replication(&cfg, 2).unwrap().run_to_end();
    let alt = SimConfig { seed: 44, ..cfg.clone() };
    assert_eq!(third.capacity_estimate, run(&alt).unwrap().capacity_estimate);
    assert!(run_replications(&cfg, 0).is_err());
}

#[test]
fn replication_stderr_shrinks() {
    let cfg = SimConfig::new(NetworkScenario::complete(vec![0.15; 5], 0.5).unwrap(), 4_000, 7);
    let few = run_replications(&cfg, 10).unwrap().capacity_stderr;
    let many = run_replications(&cfg, 40).unwrap().capacity_stderr;
    let ratio = few / many;
    assert!((1.2..3.4).contains(&ratio), "{ratio}");
}

#[test]
fn chains_are_well_formed_and_heights_monotone() {
    let cfg = SimConfig::new(NetworkScenario::complete(vec![0.3, 0.25, 0.2, 0.1], 0.35).unwrap(), 3_000, 8);
    let mut sim = Simulation::new(&cfg).unwrap();
    let mut last = 0;
    while !sim.is_done() {
        sim.step();
        assert!(sim.max_height() >= last);
        last = sim.max_height();
        let tops: Vec<u64> = (0..4).map(|i| sim.tree().height(sim.tips()[i])).collect();
        assert_eq!(*tops.iter().max().unwrap(), sim.max_height());
        for m in 0..4 {
            let chain = sim.local_chain(m);
            let base = sim.settled_height();
            for (k, b) in chain.blocks.iter().enumerate() {
                assert_eq!(b.height, base + k as u64 + 1);
            }
            assert_eq!(chain.length, base + chain.blocks.len() as u64);
        }
        let ids: HashSet<u64> = sim.tree().blocks().iter().map(|b| b.id).collect();
        assert_eq!(ids.len(), sim.tree().len());
        assert!(sim.tree().len() < 200);
    }
}

#[test]
fn ghost_tracks_longest_chain_slot_by_slot() {
    for (seed, a12, a21) in [(1, 0.5, 0.5), (2, 0.1, 0.9), (3, 0.02, 0.3)] {
        let s = two(0.3, 0.2, a12, a21);
        let lc = SimConfig::new(s.clone(), 20_000, seed);
        let gh = lc.clone().with_rule("ghost-two-miner");
        let mut x = Simulation::new(&lc).unwrap();
        let mut y = Simulation::new(&gh).unwrap();
        while !x.is_done() {
            x.step();
            y.step();
            assert_eq!(x.max_height(), y.max_height());
            for m in 0..2 {
                assert_eq!(x.tree().height(x.tips()[m]), y.tree().height(y.tips()[m]));
            }
        }
        assert_eq!(x.run_to_end().capacity_estimate, y.run_to_end().capacity_estimate);
    }
}

#[test]
fn stale_ratio_agrees_with_empirical_rates() {
    let cfg = SimConfig::new(NetworkScenario::star(vec![0.1; 5], 0.4).unwrap(), 20_000, 13);
    let r = run(&cfg).unwrap();
    let via_rates = netmodel::stale_ratio(&r.empirical_rates(), r.capacity_estimate).unwrap();
    assert!((via_rates - r.stale_ratio).abs() < 1e-12);
}

#[test]
fn config_validation() {
    let three = NetworkScenario::complete(vec![0.1; 3], 0.5).unwrap();
    assert!(run(&SimConfig::new(three.clone(), 0, 1)).is_err());
    assert!(run(&SimConfig::new(three.clone(), 10, 1).with_rule("ghost-two-miner")).is_err());
    assert!(run(&SimConfig::new(three.clone(), 10, 1).with_rule("nakamoto")).is_err());
    let mut cfg = SimConfig::new(three, 10, 1);
    cfg.track_pairs = true;
    assert!(run(&cfg).is_err());
}

#[test]
fn fewer_slots_than_batches() {
    let r = run(&SimConfig::new(two(0.5, 0.5, 0.5, 0.5), 7, 1)).unwrap();
    assert!(r.capacity_estimate <= 1.0);
    assert!(r.capacity_stderr.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn report_invariants(
        rates in prop::collection::vec(0.0f64..=1.0, 1..5),
        alpha in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let s = NetworkScenario::complete(rates, alpha).unwrap();
        let r = run(&SimConfig::new(s, 1_500, seed)).unwrap();
        prop_assert!(r.total_admitted <= r.total_mined);
        prop_assert!((0.0..=1.0).contains(&r.capacity_estimate));
        prop_assert!((0.0..=1.0).contains(&r.stale_ratio));
        if r.total_admitted > 0 {
            let total: f64 = r.gamma_empirical.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
        let f = r.consistency_fraction.unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }
}
