use std::fs;
use std::path::PathBuf;

use chaincap::cli::{evaluate, ExperimentSpec};

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentSpec {
    ExperimentSpec::from_json(&fs::read_to_string(config_dir().join(name)).unwrap()).unwrap()
}

#[test]
fn every_shipped_config_validates() {
    let mut count = 0;
    for entry in fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let spec = ExperimentSpec::from_json(&fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!spec.points().unwrap().is_empty(), "{}", path.display());
            spec.model_names().unwrap();
            count += 1;
        }
    }
    assert!(count >= 10);
}

#[test]
fn derivative_changes_sign_at_equal_rates() {
    let t = evaluate(&load("derivative.json")).unwrap();
    assert_eq!(t.failures(), 0);
    for row in &t.rows {
        let c1 = row.point.scenario.rate(0);
        let d = row.metrics.derivative.unwrap();
        if c1 < 0.45 {
            assert!(d < 0.0, "c1 = {c1}: {d}");
        } else if c1 > 0.55 {
            assert!(d > 0.0, "c1 = {c1}: {d}");
        }
    }
}

#[test]
fn ideal_two_miner_sweep_is_consistent() {
    let t = evaluate(&load("ideal_two_miner.json")).unwrap();
    for row in &t.rows {
        let m = &row.metrics;
        let (c1, c2) = (row.point.scenario.rate(0), row.point.scenario.rate(1));
        assert!((m.r_closed.unwrap() - m.r_ideal.unwrap()).abs() < 1e-12);
        if let Some((g1, g2)) = m.gamma {
            assert_eq!(g1 + g2, 1.0);
            assert!((m.eta.unwrap() - (c1 + c2 - 2.0 * c1 * c2) / (c1 + c2 - c1 * c2)).abs() < 1e-12);
        }
    }
}

#[test]
fn admitted_share_peaks_in_the_interior() {
    let t = evaluate(&load("admitted_share.json")).unwrap();
    assert_eq!(t.failures(), 0);
    assert_eq!(t.rows.len(), 4 * 49);
    for curve in t.rows.chunks(49) {
        let (share, ratio): (Vec<f64>, Vec<f64>) = curve
            .iter()
            .map(|r| {
                let (c1, c2) = (r.point.scenario.rate(0), r.point.scenario.rate(1));
                let x = c1 / (c1 + c2);
                (x, r.metrics.gamma.unwrap().0 / x)
            })
            .unzip();
        let best = (0..ratio.len()).max_by(|&a, &b| ratio[a].total_cmp(&ratio[b])).unwrap();
        assert!(share[best] > 0.5 && share[best] < 0.9, "peak at share {}", share[best]);
    }
}

#[test]
fn asymmetric_sweep_analytic_columns() {
    let mut spec = load("asymmetric_links.json");
    spec.models = Some(vec!["closed-form".into(), "edtmc".into()]);
    let t = evaluate(&spec).unwrap();
    assert_eq!(t.failures(), 0);
    for row in &t.rows {
        assert!((row.metrics.r_closed.unwrap() - row.metrics.r_edtmc.unwrap()).abs() < 1e-4);
    }
    let r = |a12: f64, a21: f64| {
        t.rows
            .iter()
            .find(|r| (r.point.scenario.link(0, 1) - a12).abs() < 1e-9 && r.point.scenario.link(1, 0) == a21)
            .unwrap()
            .metrics
            .r_closed
            .unwrap()
    };
    assert!((r(0.2, 0.8) - r(0.8, 0.2)).abs() < 0.002);
    assert!(r(0.8, 0.2) > r(0.2, 0.2));
}

#[test]
fn seed_is_recorded_and_reproducible() {
    let mut spec = load("lan_comparison_a.json");
    spec.settings.slots = 5000;
    let a = evaluate(&spec).unwrap().to_csv_string().unwrap();
    assert_eq!(a, evaluate(&spec).unwrap().to_csv_string().unwrap());
    spec.settings.seed += 1;
    assert_ne!(a, evaluate(&spec).unwrap().to_csv_string().unwrap());
}
