use optomech::cavity::intensity_slope;
use optomech::equilibrium::solve_fixed_point;
use optomech::proximity::{ForceModel, TableRange};
use optomech::seo::{
    bifurcation_lines, bolometric_upsilon, seo_grid, CellStatus, SeoGridResult, SeoModel,
};
use proptest::prelude::*;

fn model() -> SeoModel {
    SeoModel::reference(
        ForceModel::reference()
            .tabulated(TableRange::default())
            .unwrap(),
    )
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Distances covering one resonance period around 1.5 μm.
fn period_grid(m: &SeoModel, n: usize) -> Vec<f64> {
    let half = 0.5 * m.cavity.wavelength;
    let centre = m.resonance_gap + 2.0 * half;
    linspace(centre - 0.5 * half, centre + 0.5 * half, n)
}

fn powers(n: usize) -> Vec<f64> {
    linspace(0.0, 6e-9, n)
}

#[test]
fn zero_power_never_oscillates() {
    let m = model();
    let g = seo_grid(&period_grid(&m, 60), &powers(20), &m).unwrap();
    assert!(g.seo_mask[0].iter().all(|&s| !s));
    assert!(g.seo_mask.iter().flatten().any(|&s| s));
    assert_eq!(g.failures(), 0);
    let tiny = seo_grid(&period_grid(&m, 60), &[0.0, 1e-15], &m).unwrap();
    assert!(tiny.seo_mask.iter().flatten().all(|&s| !s));
}

#[test]
fn thresholds_scale_with_power_scale() {
    let m = model();
    let d = period_grid(&m, 80);
    let p = powers(30);
    let a = seo_grid(&d, &p, &m).unwrap();
    let mut m2 = m.clone();
    m2.bolometric.power_scale *= 2.0;
    let p2: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
    let b = seo_grid(&d, &p2, &m2).unwrap();
    assert_eq!(a.gamma_eff, b.gamma_eff);
    assert_eq!(a.seo_mask, b.seo_mask);
    let (ta, tb) = (a.thresholds(), b.thresholds());
    assert!(ta.iter().any(Option::is_some));
    for (x, y) in ta.iter().zip(&tb) {
        match (x, y) {
            (Some(x), Some(y)) => assert!((y - 2.0 * x).abs() <= 1e-12 * y, "{x:e} {y:e}"),
            (None, None) => {}
            _ => panic!("threshold present in one run only"),
        }
    }
}

#[test]
fn lowest_threshold_sits_at_steepest_slope() {
    let m = model();
    let d = period_grid(&m, 241);
    let g = seo_grid(&d, &powers(40), &m).unwrap();
    let th = g.thresholds();
    let (i_min, _) = th
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    // Dense scan of the destabilizing slope along the unperturbed fixed point
    let theta = m.bolometric.theta_sign;
    let scan = linspace(d[0], d[d.len() - 1], 20_001);
    let (d_star, _) = scan
        .iter()
        .map(|&dd| {
            let x = solve_fixed_point(dd, &m.force, &m.mode).unwrap().x_f;
            (dd, -theta * intensity_slope(x, &m.cavity_at(dd)))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let step = d[1] - d[0];
    assert!(
        (d[i_min] - d_star).abs() <= 1.5 * step,
        "{:e} vs {d_star:e}",
        d[i_min]
    );
}

fn masked_slope_signs(m: &SeoModel, g: &SeoGridResult) -> (usize, usize) {
    let (mut pos, mut neg) = (0, 0);
    for (j, row) in g.seo_mask.iter().enumerate() {
        for (i, &s) in row.iter().enumerate() {
            if s {
                let x = m.fixed_point(g.d_grid[i], g.p_l_grid[j]).unwrap();
                if intensity_slope(x, &m.cavity_at(g.d_grid[i])) > 0.0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
        }
    }
    (pos, neg)
}

#[test]
fn flipping_deflection_reflects_region() {
    let m = model();
    let d = period_grid(&m, 60);
    let p = powers(15);
    let a = seo_grid(&d, &p, &m).unwrap();
    let mut flipped = m.clone();
    flipped.bolometric.theta_sign = 1.0;
    let b = seo_grid(&d, &p, &flipped).unwrap();
    let (ap, an) = masked_slope_signs(&m, &a);
    let (bp, bn) = masked_slope_signs(&flipped, &b);
    assert!(ap > 0 && an == 0, "{ap} {an}");
    assert!(bn > 0 && bp == 0, "{bp} {bn}");
    // The approach side is at larger distance than the resonance
    let centre = m.resonance_gap + m.cavity.wavelength;
    let first = |g: &SeoGridResult| g.thresholds().iter().position(Option::is_some).unwrap();
    assert!(d[first(&a)] > centre - 0.02 * m.cavity.wavelength);
    assert!(d[first(&b)] < centre);
}

fn enclosing(axis: &[f64], v: f64) -> usize {
    axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1
}

#[test]
fn bifurcation_lines_follow_zero_damping() {
    let m = model();
    let g = seo_grid(&period_grid(&m, 50), &powers(25), &m).unwrap();
    let lines = bifurcation_lines(&g);
    assert!(!lines.is_empty());
    for line in &lines {
        for &(d, p) in line {
            let (i, j) = (enclosing(&g.d_grid, d), enclosing(&g.p_l_grid, p));
            let corners = [
                g.gamma_eff[j][i],
                g.gamma_eff[j][i + 1],
                g.gamma_eff[j + 1][i],
                g.gamma_eff[j + 1][i + 1],
            ];
            let spread = corners.iter().cloned().fold(f64::MIN, f64::max)
                - corners.iter().cloned().fold(f64::MAX, f64::min);
            let value = m.cell(d, p).unwrap().gamma_eff;
            assert!(
                value.abs() < spread,
                "({d:e}, {p:e}): {value:e} vs {spread:e}"
            );
        }
    }
    // Every mask transition along a grid edge has a contour point on that edge
    let points: Vec<(f64, f64)> = lines.iter().flatten().copied().collect();
    let on_segment = |a: (f64, f64), b: (f64, f64)| {
        points.iter().any(|&(x, y)| {
            x >= a.0.min(b.0) && x <= a.0.max(b.0) && y >= a.1.min(b.1) && y <= a.1.max(b.1)
        })
    };
    for j in 0..g.p_l_grid.len() {
        for i in 0..g.d_grid.len() {
            let here = (g.d_grid[i], g.p_l_grid[j]);
            if i + 1 < g.d_grid.len() && g.seo_mask[j][i] != g.seo_mask[j][i + 1] {
                assert!(on_segment(here, (g.d_grid[i + 1], here.1)));
            }
            if j + 1 < g.p_l_grid.len() && g.seo_mask[j][i] != g.seo_mask[j + 1][i] {
                assert!(on_segment(here, (here.0, g.p_l_grid[j + 1])));
            }
        }
    }
}

#[test]
fn synthetic_field_contour() {
    let d = linspace(0.0, 1.0, 81);
    let p = linspace(0.0, 2.0, 41);
    let c = |x: f64| 1.0 + 0.5 * (6.0 * x).sin();
    let field: Vec<Vec<f64>> = p
        .iter()
        .map(|&pp| d.iter().map(|&dd| pp - c(dd)).collect())
        .collect();
    let g = SeoGridResult {
        d_grid: d.clone(),
        p_l_grid: p.clone(),
        seo_mask: field
            .iter()
            .map(|r| r.iter().map(|&v| v < 0.0).collect())
            .collect(),
        omega_seo_ratio: field.clone(),
        status: vec![vec![CellStatus::Solved; d.len()]; p.len()],
        gamma_eff: field,
    };
    let lines = bifurcation_lines(&g);
    assert_eq!(lines.len(), 1);
    let (hd, hp) = (d[1] - d[0], p[1] - p[0]);
    for &(x, y) in &lines[0] {
        assert!((y - c(x)).abs() <= hp.max(hd * 3.0), "{x} {y}");
    }
    let empty = SeoGridResult {
        gamma_eff: vec![vec![1.0; d.len()]; p.len()],
        ..g
    };
    assert!(bifurcation_lines(&empty).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn gamma_b_linear_at_fixed_geometry(d in 0.6e-6f64..3e-6, p in 1e-12f64..1e-6) {
        let m = model();
        let x = solve_fixed_point(d, &m.force, &m.mode).unwrap().x_f;
        let c = m.cavity_at(d);
        let one = bolometric_upsilon(x, p, &c, &m.bolometric, &m.mode).unwrap().gamma_added;
        let three = bolometric_upsilon(x, 3.0 * p, &c, &m.bolometric, &m.mode).unwrap().gamma_added;
        prop_assert!((three - 3.0 * one).abs() <= 1e-14 * three.abs());
    }
}
