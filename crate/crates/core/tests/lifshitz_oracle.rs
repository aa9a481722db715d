mod support;

use optomech::lifshitz::{lifshitz_integral, QuadratureSpec};
use support::oracle::brute_force_il;

#[test]
fn adaptive_matches_dense_grid() {
    let spec = QuadratureSpec::default();
    for (d, y) in [
        (0.1, 0.1),
        (1.0, 10.0),
        (10.0, 1.0),
        (100.0, 3.0),
        (1000.0, 0.5),
    ] {
        let adaptive = lifshitz_integral(d, y, &spec).unwrap().value;
        let oracle = brute_force_il(d, y, 1000);
        let rel = (adaptive - oracle).abs() / oracle;
        assert!(
            rel <= 1e-5,
            "D = {d}, y = {y}: adaptive {adaptive}, oracle {oracle}, rel {rel:e}"
        );
    }
}

#[test]
fn halving_tolerance_changes_little() {
    let spec = QuadratureSpec::default();
    let tight = QuadratureSpec {
        relative_tolerance: 0.5 * spec.relative_tolerance,
        ..spec
    };
    for (d, y) in [(0.3, 1.22), (16.0, 1.22), (500.0, 0.2)] {
        let a = lifshitz_integral(d, y, &spec).unwrap();
        let b = lifshitz_integral(d, y, &tight).unwrap();
        assert!(
            (a.value - b.value).abs() <= spec.relative_tolerance * b.value,
            "{d} {y}"
        );
        assert!(a.error <= 10.0 * spec.relative_tolerance * a.value.abs());
    }
}

#[test]
fn ideal_metal_limit() {
    let v = lifshitz_integral(1e4, 1e-4, &QuadratureSpec::default())
        .unwrap()
        .value;
    assert!((v - 1.0).abs() < 1e-3, "{v}");
}

#[test]
fn finite_cutoff_underestimates() {
    let full = lifshitz_integral(5.0, 1.0, &QuadratureSpec::default())
        .unwrap()
        .value;
    let cut = lifshitz_integral(
        5.0,
        1.0,
        &QuadratureSpec {
            p_cutoff: 2.0,
            ..QuadratureSpec::default()
        },
    )
    .unwrap()
    .value;
    assert!(cut < full && cut > 0.0);
}
