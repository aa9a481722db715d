use optomech::backreaction::MechanicalMode;
use optomech::equilibrium::{
    distance_at_frequency_ratio, frequency_vs_distance, pull_in_distance, solve_fixed_point,
};
use optomech::proximity::{force_gradient, total_static_force, ForceModel, TableRange};

fn setup() -> (ForceModel, MechanicalMode) {
    (
        ForceModel::reference()
            .tabulated(TableRange::default())
            .unwrap(),
        MechanicalMode::reference(),
    )
}

#[test]
fn sweep_is_monotone_and_saturates() {
    let (force, mode) = setup();
    let grid: Vec<f64> = (0..200)
        .map(|i| 0.2e-6 + 3.8e-6 * i as f64 / 199.0)
        .collect();
    let recs = frequency_vs_distance(&grid, &force, &mode).unwrap();
    let stable: Vec<_> = recs.iter().filter(|r| r.stable).collect();
    assert!(stable.len() > 150 && !recs[0].stable);
    assert!(stable
        .windows(2)
        .all(|w| w[1].omega_ratio > w[0].omega_ratio));
    assert!(recs.last().unwrap().omega_ratio >= 0.999);
    // Once stable, stays stable
    let first = recs.iter().position(|r| r.stable).unwrap();
    assert!(recs[first..].iter().all(|r| r.stable));
}

#[test]
fn pull_in_and_crossing() {
    let (force, mode) = setup();
    let d_pi = pull_in_distance(&force, &mode, (0.1e-6, 1e-6)).unwrap();
    assert!(d_pi > 0.2e-6 && d_pi < 0.4e-6, "{d_pi:e}");
    let near = solve_fixed_point(d_pi + 1e-11, &force, &mode).unwrap();
    assert!(near.stability_margin < 0.05, "{}", near.stability_margin);
    let d87 = distance_at_frequency_ratio(0.87, &force, &mode, (d_pi + 1e-10, 4e-6)).unwrap();
    let fp = solve_fixed_point(d87, &force, &mode).unwrap();
    assert!(fp.stable && (fp.frequency_ratio() - 0.87).abs() < 1e-6);
}

#[test]
fn fixed_points_are_self_consistent() {
    let (force, mode) = setup();
    let k = mode.stiffness();
    for i in 0..40 {
        let d = 0.3e-6 + 0.1e-6 * i as f64;
        let Ok(fp) = solve_fixed_point(d, &force, &mode) else {
            continue;
        };
        let f = total_static_force(fp.gap_f, &force).unwrap();
        assert!((k * fp.x_f - f).abs() <= 1e-9 * f, "{d:e}");
        assert_eq!(fp.frequency_ratio(), fp.stability_margin.sqrt());
        let margin = 1.0 - force_gradient(fp.gap_f, &force).unwrap() / k;
        assert_eq!(margin, fp.stability_margin);
    }
}
