use chaincap::edtmc;
use chaincap::twominer::{self, TwoMinerParams};
use chaincap::NetworkScenario;

#[test]
fn truncated_chain_recovers_two_miner_steady_state() {
    let scenario = NetworkScenario::two_miner(0.2, 0.4, 0.2, 0.8).unwrap();
    let chain = edtmc::build_chain(&scenario, 40).unwrap();
    let pi = edtmc::steady_state(&chain).unwrap();
    let exact = twominer::solve(&TwoMinerParams::new(0.2, 0.4, 0.2, 0.8).unwrap()).unwrap();
    let origin = chain.index_of(&[0, 0]).unwrap();
    assert!((pi.pi[origin] - exact.pi00).abs() < 1e-6);
    let one_ahead = chain.index_of(&[1, 0]).unwrap();
    assert!((pi.pi[one_ahead] - exact.pi10).abs() < 1e-6);
}

#[test]
fn converged_truncation_matches_closed_form() {
    let scenario = NetworkScenario::complete(vec![0.1, 0.1], 0.5).unwrap();
    let (k, cap) = edtmc::converge_k(&scenario, 1e-6).unwrap();
    let exact = twominer::solve(&TwoMinerParams::new(0.1, 0.1, 0.5, 0.5).unwrap()).unwrap();
    assert!((cap.growth_rate - exact.r2).abs() < 1e-4, "k = {k}");
}

#[test]
fn truncated_chain_tracks_closed_form_across_links() {
    for (a12, a21) in [(0.1, 0.9), (0.5, 0.5), (0.9, 0.3), (0.3, 0.05)] {
        let scenario = NetworkScenario::two_miner(0.3, 0.15, a12, a21).unwrap();
        let (_, cap) = edtmc::converge_k(&scenario, 1e-7).unwrap();
        let exact = twominer::solve(&TwoMinerParams::new(0.3, 0.15, a12, a21).unwrap()).unwrap();
        assert!((cap.growth_rate - exact.r2).abs() < 1e-4, "a12 = {a12}, a21 = {a21}");
    }
}
