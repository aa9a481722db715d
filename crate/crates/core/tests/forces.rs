use std::f64::consts::PI;

use optomech::lifshitz::casimir_pressure;
use optomech::proximity::{
    casimir_force, casimir_pressure_magnitude, force_gradient, total_static_force,
    trapped_charge_force, CasimirTerm, ForceModel, TableRange, TrappedCharge,
};

fn casimir_only() -> ForceModel {
    ForceModel::reference().with_charge(0.0)
}

/// Composite Simpson in ln z over [gap, 10⁴·gap] plus a frozen-I_L tail.
fn log_grid_force(gap: f64, model: &ForceModel, n: usize) -> f64 {
    let span = 1e4f64.ln();
    let h = span / n as f64;
    let p = |z: f64| {
        casimir_pressure(z, &model.materials, &model.quadrature)
            .unwrap()
            .abs()
    };
    let mut sum = 0.0;
    for i in 0..=n {
        let z = gap * (i as f64 * h).exp();
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * p(z) * z;
    }
    let z_end = gap * 1e4;
    let tail = p(z_end) * z_end / 3.0;
    2.0 * PI * model.geometry.radius * (sum * h / 3.0 + tail)
}

#[test]
fn direct_force_matches_log_grid_oracle() {
    let m = casimir_only();
    for gap in [100e-9, 1e-6] {
        let direct = casimir_force(gap, &m).unwrap();
        let oracle = log_grid_force(gap, &m, 400);
        assert!(
            (direct - oracle).abs() <= 1e-6 * oracle,
            "{gap:e}: {direct:e} vs {oracle:e}"
        );
    }
}

#[test]
fn force_gradient_is_derjaguin_pressure() {
    let direct = casimir_only();
    let table = casimir_only().tabulated(TableRange::default()).unwrap();
    for gap in [50e-9, 300e-9, 2e-6] {
        for m in [&direct, &table] {
            let g = force_gradient(gap, m).unwrap();
            let expected =
                2.0 * PI * m.geometry.radius * casimir_pressure_magnitude(gap, m).unwrap();
            assert!(
                (g - expected).abs() <= 1e-6 * expected,
                "{gap:e}: {g:e} vs {expected:e}"
            );
        }
    }
}

#[test]
fn table_agrees_with_direct() {
    let direct = ForceModel::reference();
    let table = ForceModel::reference()
        .tabulated(TableRange::default())
        .unwrap();
    assert!(matches!(table.casimir, CasimirTerm::Tabulated(_)));
    for gap in [2e-9, 20e-9, 77e-9, 350e-9, 1.3e-6, 9e-6] {
        let a = casimir_force(gap, &direct).unwrap();
        let b = casimir_force(gap, &table).unwrap();
        assert!((a - b).abs() <= 1e-4 * a, "{gap:e}");
        let pa = casimir_pressure_magnitude(gap, &direct).unwrap();
        let pb = casimir_pressure_magnitude(gap, &table).unwrap();
        assert!((pa - pb).abs() <= 1e-4 * pa, "{gap:e}");
    }
}

#[test]
fn total_force_decreases_with_gap() {
    let m = ForceModel::reference()
        .tabulated(TableRange::default())
        .unwrap();
    let gaps: Vec<f64> = (0..=300)
        .map(|i| 20e-9 * (500f64).powf(i as f64 / 300.0))
        .collect();
    let forces: Vec<f64> = gaps
        .iter()
        .map(|&g| total_static_force(g, &m).unwrap())
        .collect();
    assert!(forces.windows(2).all(|w| w[1] < w[0]));
    for &g in gaps.iter().step_by(30) {
        assert!(force_gradient(g, &m).unwrap() > 0.0);
    }
}

#[test]
fn coulomb_dominates_casimir() {
    let m = ForceModel::reference();
    for gap in [100e-9, 1e-6] {
        let ratio = casimir_force(gap, &m).unwrap()
            / trapped_charge_force(gap, &TrappedCharge::reference()).unwrap();
        assert!(ratio < 1e-4, "{gap:e}: {ratio:e}");
    }
}
