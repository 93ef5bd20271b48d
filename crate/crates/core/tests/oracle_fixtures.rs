//! Frozen oracle outputs against the fast solvers.

use std::path::PathBuf;

use dtn_probe::experiment::fit_slope;
use dtn_probe::oracles::fixtures::{standard_fixtures, Fixture, FixtureSpec};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load_all() -> Vec<Fixture> {
    standard_fixtures()
        .into_iter()
        .map(|(name, spec, tol)| {
            let f = Fixture::read(&fixture_dir().join(format!("{name}.json"))).unwrap();
            assert_eq!(f.spec, spec, "{name}: frozen generator parameters drifted");
            assert_eq!(f.tolerance, tol, "{name}: tolerance drifted");
            f
        })
        .collect()
}

#[test]
fn every_fixture_file_is_in_the_standard_set() {
    let names: Vec<String> = standard_fixtures().into_iter().map(|f| f.0).collect();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        assert!(names.contains(&stem), "stray fixture {}", path.display());
    }
}

#[test]
fn fast_path_matches_frozen_oracles() {
    for f in load_all() {
        let r = f.check().unwrap();
        assert!(r.passed, "{}: error {:.3e} exceeds {:e}", f.name, f.observed_error().unwrap(), f.tolerance);
    }
}

#[test]
fn frozen_identity_sides_agree() {
    let f = load_all().into_iter().find(|f| f.name == "identity").unwrap();
    for pair in f.reference.chunks(2) {
        let scale = pair[0].abs().max(pair[1].abs());
        assert!((pair[0] - pair[1]).abs() <= 1e-10 * scale, "{pair:?}");
    }
}

#[test]
fn frozen_frechet_tables_have_first_order_slopes() {
    for f in load_all() {
        if let FixtureSpec::Frechet { epsilons, .. } = &f.spec {
            let slope = fit_slope(epsilons, &f.reference).unwrap().slope;
            assert!((0.9..=1.1).contains(&slope), "{}: slope {slope}", f.name);
        }
    }
}

#[test]
fn frozen_lambda1_sits_below_the_continuum_value() {
    let f = load_all().into_iter().find(|f| f.name == "lambda1").unwrap();
    let exact = 3.0 * std::f64::consts::PI.powi(2);
    assert!(f.reference[0] < exact && f.reference[0] > 0.9 * exact, "{}", f.reference[0]);
}
