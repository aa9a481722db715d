//! Bolometric back-reaction and the self-excited-oscillation (SEO) map over
//! the (distance, laser power) plane.
//!
//! Absorbed power `η P_L I(x)` heats the mirror, which relaxes at rate `γ_H`
//! and deflects it by `θ T_R`. Only the grouping `Π = ω_m² γ_H λ/(θη)` is
//! known, so the static thermal force is written
//! `F_B = ±k λ P_L I(x)/Π` with `k = m ω_m²`.
//!
//! The cavity phase follows the gap: `x_D = g_R − gap`, where the resonance
//! gap `g_R` places one optical resonance; the others repeat every `λ/2`.

use rayon::prelude::*;

use crate::backreaction::{
    upsilon_s, AncillaCoupling, ComplexFrequencyShift, MechanicalMode, ShiftConvention,
};
use crate::cavity::{intensity, intensity_slope, CavityModel};
use crate::constants::device;
use crate::equilibrium::solve_fixed_point;
use crate::error::{domain, require_positive, Error, Result};
use crate::proximity::{force_gradient, total_static_force, ForceModel};
use crate::roots::illinois;

/// Bolometric coupling through the grouped parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BolometricParams {
    /// `Π = ω_m² γ_H λ/(θη)`, W.
    pub power_scale: f64,
    /// `γ_H/ω_m`.
    pub gamma_h_ratio: f64,
    /// Direction of the thermal deflection, ±1.
    pub theta_sign: f64,
}

impl BolometricParams {
    pub fn new(power_scale: f64, gamma_h_ratio: f64, theta_sign: f64) -> Result<Self> {
        let b = Self {
            power_scale,
            gamma_h_ratio,
            theta_sign,
        };
        b.validate()?;
        Ok(b)
    }

    /// `Π = 3.3 mW`, `γ_H = ω_m`, deflection that destabilizes the
    /// approach side of each resonance.
    pub fn reference() -> Self {
        Self {
            power_scale: device::POWER_SCALE,
            gamma_h_ratio: 1.0,
            theta_sign: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("power_scale", self.power_scale)?;
        require_positive("gamma_h_ratio", self.gamma_h_ratio)?;
        if self.theta_sign != 1.0 && self.theta_sign != -1.0 {
            return Err(domain(format!(
                "theta_sign must be +1 or -1, got {}",
                self.theta_sign
            )));
        }
        Ok(())
    }

    fn amplitude(&self, p_l: f64, cavity: &CavityModel, mode: &MechanicalMode) -> f64 {
        self.theta_sign * mode.stiffness() * cavity.wavelength * p_l / self.power_scale
    }
}

fn check_power(p_l: f64) -> Result<()> {
    if !(p_l >= 0.0 && p_l.is_finite()) {
        return Err(domain(format!(
            "laser power must be non-negative, got {p_l}"
        )));
    }
    Ok(())
}

/// Static thermal force `θ k λ P_L I(x)/Π`, N (toward the dome positive).
pub fn thermal_force_static(
    x: f64,
    p_l: f64,
    cavity: &CavityModel,
    bol: &BolometricParams,
    mode: &MechanicalMode,
) -> Result<f64> {
    bol.validate()?;
    check_power(p_l)?;
    Ok(bol.amplitude(p_l, cavity, mode) * intensity(x, cavity))
}

/// `dF_B/dx`, N/m.
pub fn thermal_force_gradient(
    x: f64,
    p_l: f64,
    cavity: &CavityModel,
    bol: &BolometricParams,
    mode: &MechanicalMode,
) -> Result<f64> {
    bol.validate()?;
    check_power(p_l)?;
    Ok(bol.amplitude(p_l, cavity, mode) * intensity_slope(x, cavity))
}

/// Back-reaction shift `(ω_B, γ_B)` of the bolometric force at `x_f`.
pub fn bolometric_upsilon(
    x_f: f64,
    p_l: f64,
    cavity: &CavityModel,
    bol: &BolometricParams,
    mode: &MechanicalMode,
) -> Result<ComplexFrequencyShift> {
    let gradient = thermal_force_gradient(x_f, p_l, cavity, bol, mode)?;
    let coupling = AncillaCoupling {
        gamma_s: bol.gamma_h_ratio * mode.omega_m,
        force_gradient: gradient,
    };
    upsilon_s(&coupling, mode, ShiftConvention::default())
}

/// Everything needed to evaluate one cell of the SEO map.
#[derive(Debug, Clone)]
pub struct SeoModel {
    pub force: ForceModel,
    pub cavity: CavityModel,
    pub bolometric: BolometricParams,
    pub mode: MechanicalMode,
    /// Gap `g_R` at which the cavity is resonant, m.
    pub resonance_gap: f64,
}

/// Linearized mode at one (d, P_L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeoCell {
    pub x_f: f64,
    pub gap_f: f64,
    /// `γ_m + γ_B`, rad/s.
    pub gamma_eff: f64,
    /// `√(1 − F′_static/k) + ω_B/ω_m`.
    pub omega_seo_ratio: f64,
    pub shift: ComplexFrequencyShift,
}

impl SeoModel {
    pub fn reference(force: ForceModel) -> Self {
        let cavity = CavityModel::reference();
        Self {
            force,
            cavity,
            bolometric: BolometricParams::reference(),
            mode: MechanicalMode::reference(),
            resonance_gap: 0.5 * cavity.wavelength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.bolometric.validate()?;
        self.mode.validate()?;
        if !self.resonance_gap.is_finite() {
            return Err(domain("resonance_gap must be finite"));
        }
        Ok(())
    }

    /// Cavity with the displacement origin of distance `d`.
    pub fn cavity_at(&self, d: f64) -> CavityModel {
        self.cavity.centered_at(d - self.resonance_gap)
    }

    /// Combined force balance `k x = F_static(d − x) + F_B(x)`.
    ///
    /// Starts at the optically unperturbed equilibrium and walks in the
    /// direction the thermal force pushes until the residual changes sign.
    pub fn fixed_point(&self, d: f64, p_l: f64) -> Result<f64> {
        let x0 = solve_fixed_point(d, &self.force, &self.mode)?.x_f;
        self.fixed_point_from(d, p_l, x0)
    }

    fn fixed_point_from(&self, d: f64, p_l: f64, x0: f64) -> Result<f64> {
        let cavity = self.cavity_at(d);
        let k = self.mode.stiffness();
        let residual = |x: f64| -> Result<f64> {
            Ok(k * x
                - total_static_force(d - x, &self.force)?
                - thermal_force_static(x, p_l, &cavity, &self.bolometric, &self.mode)?)
        };
        let r0 = residual(x0)?;
        if r0 == 0.0 {
            return Ok(x0);
        }
        // r < 0 means the net force pushes toward the dome
        let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
        let step = cavity.wavelength / 256.0;
        let wall = d * (1.0 - 1e-6);
        let reach =
            self.bolometric.amplitude(p_l, &cavity, &self.mode).abs() * cavity.finesse / k + step;
        let (mut a, mut ra) = (x0, r0);
        loop {
            let mut b = a + dir * step;
            if dir > 0.0 && b >= wall {
                b = wall;
            }
            let rb = residual(b)?;
            if rb.signum() != ra.signum() || rb == 0.0 {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let mut failure = None;
                let root = illinois(
                    |x| match residual(x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    lo,
                    hi,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                return root;
            }
            if dir > 0.0 && b >= wall {
                return Err(Error::PullIn {
                    d,
                    max_residual: rb,
                });
            }
            if (b - x0).abs() > reach + d {
                return Err(domain(format!(
                    "no fixed point within {reach:e} m of {x0:e} at d = {d:e}"
                )));
            }
            a = b;
            ra = rb;
        }
    }

    /// Linearized damping and frequency at `(d, P_L)`.
    pub fn cell(&self, d: f64, p_l: f64) -> Result<SeoCell> {
        let x0 = solve_fixed_point(d, &self.force, &self.mode)?.x_f;
        self.cell_from(d, p_l, x0)
    }

    fn cell_from(&self, d: f64, p_l: f64, x0: f64) -> Result<SeoCell> {
        let x_f = self.fixed_point_from(d, p_l, x0)?;
        let gap_f = d - x_f;
        let cavity = self.cavity_at(d);
        let k = self.mode.stiffness();
        let static_gradient = force_gradient(gap_f, &self.force)?;
        let thermal_gradient =
            thermal_force_gradient(x_f, p_l, &cavity, &self.bolometric, &self.mode)?;
        if static_gradient + thermal_gradient >= k {
            return Err(Error::PullIn {
                d,
                max_residual: static_gradient + thermal_gradient - k,
            });
        }
        let shift = bolometric_upsilon(x_f, p_l, &cavity, &self.bolometric, &self.mode)?;
        Ok(SeoCell {
            x_f,
            gap_f,
            gamma_eff: self.mode.gamma_m + shift.gamma_added,
            omega_seo_ratio: (1.0 - static_gradient / k).sqrt()
                + shift.omega_shift / self.mode.omega_m,
            shift,
        })
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Solved,
    /// No stable combined equilibrium.
    PullIn,
    Failed(String),
}

/// SEO map. Matrices are indexed `[power][distance]`.
#[derive(Debug, Clone)]
pub struct SeoGridResult {
    pub d_grid: Vec<f64>,
    pub p_l_grid: Vec<f64>,
    /// `γ_m + γ_B`, rad/s; NaN where the cell failed.
    pub gamma_eff: Vec<Vec<f64>>,
    pub seo_mask: Vec<Vec<bool>>,
    /// Meaningful inside the mask; NaN where the cell failed.
    pub omega_seo_ratio: Vec<Vec<f64>>,
    pub status: Vec<Vec<CellStatus>>,
}

impl SeoGridResult {
    /// Lowest power at which each distance column enters SEO, interpolated
    /// linearly between grid rows.
    pub fn thresholds(&self) -> Vec<Option<f64>> {
        (0..self.d_grid.len())
            .map(|i| {
                (1..self.p_l_grid.len()).find_map(|j| {
                    let (a, b) = (self.gamma_eff[j - 1][i], self.gamma_eff[j][i]);
                    (a >= 0.0 && b < 0.0).then(|| {
                        let t = a / (a - b);
                        self.p_l_grid[j - 1] + t * (self.p_l_grid[j] - self.p_l_grid[j - 1])
                    })
                })
            })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.status
            .iter()
            .flatten()
            .filter(|s| **s != CellStatus::Solved)
            .count()
    }
}

fn check_grid(name: &str, grid: &[f64], strict_positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(domain(format!("{name} grid is empty")));
    }
    let bad = |v: f64| !v.is_finite() || if strict_positive { v <= 0.0 } else { v < 0.0 };
    if grid.iter().any(|&v| bad(v)) {
        return Err(domain(format!("{name} grid must be positive and finite")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Evaluates the SEO map; cell failures are recorded in `status` and the
/// sweep continues.
pub fn seo_grid(d_grid: &[f64], p_l_grid: &[f64], model: &SeoModel) -> Result<SeoGridResult> {
    check_grid("distance", d_grid, true)?;
    check_grid("laser power", p_l_grid, false)?;
    model.validate()?;
    let columns: Vec<Vec<(f64, f64, CellStatus)>> = d_grid
        .par_iter()
        .map(|&d| {
            let start = solve_fixed_point(d, &model.force, &model.mode);
            p_l_grid
                .iter()
                .map(|&p| {
                    let cell = match &start {
                        Ok(fp) => model.cell_from(d, p, fp.x_f),
                        Err(e) => Err(e.clone()),
                    };
                    match cell {
                        Ok(c) => (c.gamma_eff, c.omega_seo_ratio, CellStatus::Solved),
                        Err(Error::PullIn { .. }) => (f64::NAN, f64::NAN, CellStatus::PullIn),
                        Err(e) => {
                            log::debug!("seo cell d = {d:e}, P_L = {p:e} failed: {e}");
                            (f64::NAN, f64::NAN, CellStatus::Failed(e.to_string()))
                        }
                    }
                })
                .collect()
        })
        .collect();
    let failed = columns
        .iter()
        .flatten()
        .filter(|c| c.2 != CellStatus::Solved)
        .count();
    if failed > 0 {
        log::warn!(
            "{failed} of {} SEO cells have no stable equilibrium",
            d_grid.len() * p_l_grid.len()
        );
    }
    let rows = p_l_grid.len();
    let pick = |f: &dyn Fn(&(f64, f64, CellStatus)) -> f64| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|j| columns.iter().map(|col| f(&col[j])).collect())
            .collect()
    };
    let gamma_eff = pick(&|c| c.0);
    let omega_seo_ratio = pick(&|c| c.1);
    let seo_mask = gamma_eff
        .iter()
        .map(|row| row.iter().map(|&g| g < 0.0).collect())
        .collect();
    let status = (0..rows)
        .map(|j| columns.iter().map(|col| col[j].2.clone()).collect())
        .collect();
    Ok(SeoGridResult {
        d_grid: d_grid.to_vec(),
        p_l_grid: p_l_grid.to_vec(),
        gamma_eff,
        seo_mask,
        omega_seo_ratio,
        status,
    })
}

/// Zero contours of `γ_m + γ_B`, as polylines of `(d, P_L)`.
pub fn bifurcation_lines(grid: &SeoGridResult) -> Vec<Vec<(f64, f64)>> {
    crate::contour::zero_contours(&grid.d_grid, &grid.p_l_grid, &grid.gamma_eff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proximity::TrappedCharge;
    use proptest::prelude::*;

    fn mode() -> MechanicalMode {
        MechanicalMode::reference()
    }

    fn model() -> SeoModel {
        SeoModel::reference(ForceModel::coulomb_only(TrappedCharge::reference()))
    }

    #[test]
    fn thermal_force_scale() {
        let c = CavityModel::reference();
        let b = BolometricParams::reference();
        assert_eq!(
            thermal_force_static(0.0, 0.0, &c, &b, &mode()).unwrap(),
            0.0
        );
        let f = thermal_force_static(0.0, 1e-3, &c, &b, &mode()).unwrap();
        // F_B/k is a length: λ·P_L·I/Π with I = 0.75·β_F on resonance
        let length = f.abs() / mode().stiffness();
        let expected = c.wavelength * 1e-3 * 2.25 / 3.3e-3;
        assert!((length - expected).abs() < 1e-12 * expected);
        assert!((length / c.wavelength - 0.682).abs() < 1e-3);
        assert!(f < 0.0);
        let doubled = thermal_force_static(0.1e-6, 2e-3, &c, &b, &mode()).unwrap();
        assert_eq!(
            doubled,
            2.0 * thermal_force_static(0.1e-6, 1e-3, &c, &b, &mode()).unwrap()
        );
    }

    #[test]
    fn upsilon_vanishes_at_extrema() {
        let c = CavityModel::reference();
        let b = BolometricParams::reference();
        let s = bolometric_upsilon(0.0, 1e-3, &c, &b, &mode()).unwrap();
        assert_eq!((s.omega_shift.abs(), s.gamma_added.abs()), (0.0, 0.0));
        let q = c.wavelength / 16.0;
        let side = bolometric_upsilon(q, 1e-3, &c, &b, &mode())
            .unwrap()
            .gamma_added
            .abs();
        for x in [c.wavelength / 4.0, c.wavelength / 2.0] {
            let s = bolometric_upsilon(x, 1e-3, &c, &b, &mode()).unwrap();
            assert!(s.gamma_added.abs() < 1e-9 * side);
        }
        let a = bolometric_upsilon(q, 1e-9, &c, &b, &mode()).unwrap();
        let z = bolometric_upsilon(-q, 1e-9, &c, &b, &mode()).unwrap();
        assert!(a.gamma_added * z.gamma_added < 0.0);
        assert_eq!(a.gamma_added.abs(), a.omega_shift.abs());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(BolometricParams::new(0.0, 1.0, 1.0).is_err());
        assert!(BolometricParams::new(1e-3, -1.0, 1.0).is_err());
        assert!(BolometricParams::new(1e-3, 1.0, 0.5).is_err());
        let c = CavityModel::reference();
        assert!(
            thermal_force_static(0.0, -1.0, &c, &BolometricParams::reference(), &mode()).is_err()
        );
        assert!(seo_grid(&[1e-6, 0.5e-6], &[0.0], &model()).is_err());
        assert!(seo_grid(&[1e-6], &[], &model()).is_err());
    }

    #[test]
    fn zero_power_row_is_stable() {
        let m = model();
        let d: Vec<f64> = (0..12).map(|i| 1e-6 + i as f64 * 0.07e-6).collect();
        let g = seo_grid(&d, &[0.0, 1e-9], &m).unwrap();
        assert!(g.seo_mask[0].iter().all(|&s| !s));
        for (i, &d) in d.iter().enumerate() {
            assert_eq!(g.gamma_eff[0][i], m.mode.gamma_m);
            let fp = solve_fixed_point(d, &m.force, &m.mode).unwrap();
            assert_eq!(g.omega_seo_ratio[0][i], fp.frequency_ratio());
        }
    }

    #[test]
    fn large_power_fixed_point_balances() {
        let m = model();
        let d = 2e-6;
        for p in [1e-6, 1e-4, 1e-3] {
            match m.fixed_point(d, p) {
                Ok(x) => {
                    let c = m.cavity_at(d);
                    let total = total_static_force(d - x, &m.force).unwrap()
                        + thermal_force_static(x, p, &c, &m.bolometric, &m.mode).unwrap();
                    let k = m.mode.stiffness();
                    assert!(
                        (k * x - total).abs() <= 1e-9 * (k * x).abs().max(1e-12),
                        "{p}"
                    );
                }
                Err(e) => assert!(matches!(e, Error::PullIn { .. }), "{e}"),
            }
        }
    }

    #[test]
    fn pull_in_cells_flagged() {
        let m = model();
        let g = seo_grid(&[0.1e-6, 1e-6], &[0.0], &m).unwrap();
        assert_eq!(g.status[0][0], CellStatus::PullIn);
        assert!(g.gamma_eff[0][0].is_nan() && !g.seo_mask[0][0]);
        assert_eq!(g.status[0][1], CellStatus::Solved);
        assert_eq!(g.failures(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gamma_b_linear_in_power(u in 0.0f64..1.0, p in 1e-12f64..1e-3) {
            let c = CavityModel::reference();
            let b = BolometricParams::reference();
            let x = u * c.wavelength;
            let one = bolometric_upsilon(x, p, &c, &b, &mode()).unwrap().gamma_added;
            let two = bolometric_upsilon(x, 2.0 * p, &c, &b, &mode()).unwrap().gamma_added;
            prop_assert_eq!(two, 2.0 * one);
        }
    }
}
