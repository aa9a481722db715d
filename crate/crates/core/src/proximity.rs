//! Dome–trampoline forces: Derjaguin-integrated Casimir attraction plus the
//! image force of an effective trapped charge.
//!
//! Sign convention used throughout the crate: attractive forces are
//! positive, the mirror displacement `x` points toward the dome, and the gap
//! is `d - x`. A force that grows as the gap closes therefore has a positive
//! gradient with respect to `x`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::constants::{device, C, EPSILON_0, HBAR};
use crate::error::{domain, require_positive, Error, Result};
use crate::interp::MonotoneCubic;
use crate::lifshitz::{lifshitz_integral, validity_window, PlatePairMaterials, QuadratureSpec};
use crate::quadrature::{gauss_legendre10, integrate, Tolerance};

/// Upper limit of the direct Derjaguin integral, in units of the gap.
const DERJAGUIN_SPAN: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    /// Dome radius, m.
    pub radius: f64,
}

impl SphereGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        require_positive("dome radius", radius)?;
        Ok(Self { radius })
    }
}

/// Effective trapped charge and the metal parameters that set its damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappedCharge {
    /// Effective total trapped charge, C. Enters only squared.
    pub charge: f64,
    /// Debye screening length of the metal, m.
    pub debye_length: f64,
    /// Conductivity in Gaussian units, Hz.
    pub conductivity: f64,
}

impl TrappedCharge {
    pub fn new(charge: f64, debye_length: f64, conductivity: f64) -> Result<Self> {
        let c = Self {
            charge,
            debye_length,
            conductivity,
        };
        c.validate()?;
        Ok(c)
    }

    /// Aluminum trampoline values with the reference charge.
    pub fn reference() -> Self {
        Self {
            charge: device::TRAPPED_CHARGE,
            debye_length: device::DEBYE_LENGTH,
            conductivity: device::CONDUCTIVITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.charge.is_finite() && self.charge >= 0.0) {
            return Err(domain(format!(
                "trapped charge must be finite and >= 0, got {}",
                self.charge
            )));
        }
        require_positive("Debye length", self.debye_length)?;
        require_positive("conductivity", self.conductivity)
    }
}

/// How the Casimir term of a [`ForceModel`] is evaluated.
#[derive(Debug, Clone)]
pub enum CasimirTerm {
    /// No Casimir force (the ε → 1 limit).
    Off,
    /// Nested quadrature on every call.
    Direct,
    /// Memoized pressure table shared between threads.
    Tabulated(Arc<PressureTable>),
}

/// Geometry, charge and materials composing the static dome–trampoline force.
#[derive(Debug, Clone)]
pub struct ForceModel {
    pub geometry: SphereGeometry,
    pub charge: TrappedCharge,
    pub materials: PlatePairMaterials,
    pub quadrature: QuadratureSpec,
    pub casimir: CasimirTerm,
}

impl ForceModel {
    /// Model with direct (unmemoized) Casimir evaluation.
    pub fn new(
        geometry: SphereGeometry,
        charge: TrappedCharge,
        materials: PlatePairMaterials,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        charge.validate()?;
        materials.validate()?;
        quadrature.validate()?;
        require_positive("dome radius", geometry.radius)?;
        Ok(Self {
            geometry,
            charge,
            materials,
            quadrature,
            casimir: CasimirTerm::Direct,
        })
    }

    /// Reference device with direct Casimir evaluation.
    pub fn reference() -> Self {
        Self {
            geometry: SphereGeometry {
                radius: device::DOME_RADIUS,
            },
            charge: TrappedCharge::reference(),
            materials: PlatePairMaterials::reference(),
            quadrature: QuadratureSpec::default(),
            casimir: CasimirTerm::Direct,
        }
    }

    /// Trapped-charge force only.
    pub fn coulomb_only(charge: TrappedCharge) -> Self {
        Self {
            charge,
            casimir: CasimirTerm::Off,
            ..Self::reference()
        }
    }

    /// Replaces direct Casimir evaluation with a table over `range`.
    pub fn tabulated(mut self, range: TableRange) -> Result<Self> {
        if !matches!(self.casimir, CasimirTerm::Off) {
            let table = PressureTable::build(&self.materials, &self.quadrature, range)?;
            self.casimir = CasimirTerm::Tabulated(Arc::new(table));
        }
        Ok(self)
    }

    pub fn with_table(mut self, table: Arc<PressureTable>) -> Self {
        self.casimir = CasimirTerm::Tabulated(table);
        self
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge.charge = charge;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.geometry.radius = radius;
        self
    }
}

/// Separation range and density of a [`PressureTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRange {
    pub min_separation: f64,
    pub max_separation: f64,
    pub points_per_decade: usize,
}

impl Default for TableRange {
    fn default() -> Self {
        Self {
            min_separation: 1e-9,
            max_separation: 1e-2,
            points_per_decade: 32,
        }
    }
}

/// `I_L` sampled on a log-spaced separation grid, with the Derjaguin
/// integral `∫_z^∞ I_L(z')/z'⁴ dz'` accumulated exactly over the
/// interpolant.
///
/// `ln I_L` is interpolated by a monotone cubic in `ln z`. Above the top
/// knot `I_L` is held constant and the `z⁻³` tail is added analytically.
#[derive(Debug, Clone)]
pub struct PressureTable {
    materials: PlatePairMaterials,
    log_il: MonotoneCubic,
    /// ∫_{z_k}^∞ I_L/z⁴ dz at each knot.
    cumulative: Vec<f64>,
}

impl PressureTable {
    pub fn build(
        materials: &PlatePairMaterials,
        spec: &QuadratureSpec,
        range: TableRange,
    ) -> Result<Self> {
        materials.validate()?;
        require_positive("table min separation", range.min_separation)?;
        if !(range.max_separation > range.min_separation) || range.points_per_decade < 2 {
            return Err(domain(
                "table range must be increasing with at least 2 points per decade",
            ));
        }
        let (lo, hi) = (range.min_separation.ln(), range.max_separation.ln());
        let n = (((hi - lo) / std::f64::consts::LN_10) * range.points_per_decade as f64).ceil()
            as usize
            + 1;
        let knots: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let y = materials.contrast();
        let values: Vec<f64> = knots
            .par_iter()
            .map(|u| {
                lifshitz_integral(u.exp() / materials.plasma_length, y, spec).map(|e| e.value.ln())
            })
            .collect::<Result<_>>()?;
        let log_il = MonotoneCubic::new(knots, values)?;

        let knots = log_il.knots();
        let mut cumulative = vec![0.0; n];
        let top = knots[n - 1];
        cumulative[n - 1] = log_il.values()[n - 1].exp() * (-3.0 * top).exp() / 3.0;
        for i in (0..n - 1).rev() {
            let seg = gauss_legendre10(
                &mut |u| (log_il.eval_in(i, u) - 3.0 * u).exp(),
                knots[i],
                knots[i + 1],
            );
            cumulative[i] = cumulative[i + 1] + seg;
        }
        Ok(Self {
            materials: *materials,
            log_il,
            cumulative,
        })
    }

    pub fn materials(&self) -> &PlatePairMaterials {
        &self.materials
    }

    /// Separation range covered by the knots, m.
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.log_il.domain();
        (lo.exp(), hi.exp())
    }

    pub fn covers(&self, z: f64) -> bool {
        z >= self.range().0
    }

    /// Interpolated `I_L` at separation `z`; above the table the top value is held.
    pub fn lifshitz_factor(&self, z: f64) -> f64 {
        let (_, hi) = self.log_il.domain();
        self.log_il.eval(z.ln().min(hi)).exp()
    }

    /// `∫_z^∞ I_L(z')/z'⁴ dz'` for `z` inside or above the table.
    pub fn derjaguin_integral(&self, z: f64) -> f64 {
        let u = z.ln();
        let knots = self.log_il.knots();
        let n = knots.len();
        if u >= knots[n - 1] {
            return self.lifshitz_factor(z) * (-3.0 * u).exp() / 3.0;
        }
        let i = self.log_il.segment(u);
        let partial = gauss_legendre10(
            &mut |s| (self.log_il.eval_in(i, s) - 3.0 * s).exp(),
            u,
            knots[i + 1],
        );
        self.cumulative[i + 1] + partial
    }
}

/// `3ħc(ε−1)/(32π²)`: pressure magnitude times `z⁴` for `I_L = 1`.
fn pressure_scale(materials: &PlatePairMaterials) -> f64 {
    3.0 * HBAR * C * materials.contrast() / (32.0 * PI * PI)
}

fn warn_if_outside_model(gap: f64, model: &ForceModel) {
    // Once per process; table builds and root searches would otherwise repeat it
    static WARNED: AtomicBool = AtomicBool::new(false);
    if gap > 0.1 * model.geometry.radius && !WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "gap {gap:e} m exceeds a tenth of the dome radius {:e} m; proximity approximation degrades",
            model.geometry.radius
        );
    }
    if let Ok((d_min, d_max)) = validity_window(&model.materials) {
        if gap < d_min || gap > d_max {
            log::debug!("gap {gap:e} m outside Lifshitz validity window [{d_min:e}, {d_max:e}] m");
        }
    }
}

/// Magnitude of the plate–plate Casimir pressure at separation `z`, Pa.
pub fn casimir_pressure_magnitude(z: f64, model: &ForceModel) -> Result<f64> {
    require_positive("separation", z)?;
    let scale = pressure_scale(&model.materials) / z.powi(4);
    match &model.casimir {
        CasimirTerm::Off => Ok(0.0),
        CasimirTerm::Tabulated(table) if table.covers(z) => Ok(scale * table.lifshitz_factor(z)),
        _ => {
            let il = lifshitz_integral(
                z / model.materials.plasma_length,
                model.materials.contrast(),
                &model.quadrature,
            )?;
            Ok(scale * il.value)
        }
    }
}

/// Derjaguin sphere–plate Casimir force `2πR ∫_gap^∞ |P(z)| dz`, N (attractive positive).
pub fn casimir_force(gap: f64, model: &ForceModel) -> Result<f64> {
    require_positive("gap", gap)?;
    warn_if_outside_model(gap, model);
    let prefactor = 2.0 * PI * model.geometry.radius * pressure_scale(&model.materials);
    match &model.casimir {
        CasimirTerm::Off => Ok(0.0),
        CasimirTerm::Tabulated(table) if table.covers(gap) => {
            Ok(prefactor * table.derjaguin_integral(gap))
        }
        _ => Ok(prefactor * direct_derjaguin_integral(gap, model)?),
    }
}

/// `∫_gap^∞ I_L(z)/z⁴ dz` by adaptive quadrature in `ln z` up to `10³·gap`,
/// plus the `z⁻³` tail with `I_L` frozen at the truncation point.
fn direct_derjaguin_integral(gap: f64, model: &ForceModel) -> Result<f64> {
    let m = &model.materials;
    let spec = &model.quadrature;
    let il = |z: f64| lifshitz_integral(z / m.plasma_length, m.contrast(), spec).map(|e| e.value);
    // Work in units of the gap so the integrand is O(1).
    let mut failure = None;
    let tol = Tolerance {
        relative: spec.relative_tolerance,
        absolute: 0.0,
        max_subdivisions: spec.max_subdivisions,
    };
    let body = integrate(
        |s| match il(gap * s.exp()) {
            Ok(v) => v * (-3.0 * s).exp(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        DERJAGUIN_SPAN.ln(),
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let body = body?.value;
    let tail = il(gap * DERJAGUIN_SPAN)? / (3.0 * DERJAGUIN_SPAN.powi(3));
    Ok((body + tail) / gap.powi(3))
}

/// Image-charge attraction `q_T² / (4πε₀ (2·gap)²)`, N.
pub fn trapped_charge_force(gap: f64, charge: &TrappedCharge) -> Result<f64> {
    require_positive("gap", gap)?;
    let q = charge.charge;
    Ok(q * q / (4.0 * PI * EPSILON_0 * (2.0 * gap).powi(2)))
}

/// Casimir plus trapped-charge force, N.
pub fn total_static_force(gap: f64, model: &ForceModel) -> Result<f64> {
    Ok(casimir_force(gap, model)? + trapped_charge_force(gap, &model.charge)?)
}

/// Derivative of [`total_static_force`] with respect to the mirror
/// displacement (`-dF/dgap`), N/m, by Ridders' extrapolated central differences.
pub fn force_gradient(gap: f64, model: &ForceModel) -> Result<f64> {
    let (slope, _) = ridders_derivative(|g| total_static_force(g, model), gap)?;
    Ok(-slope)
}

/// Ridders' polynomial extrapolation of central differences.
///
/// The initial step is a tenth of `gap`, so every probe stays at positive
/// gap. Returns the derivative and its error estimate.
pub fn ridders_derivative<F: Fn(f64) -> Result<f64>>(f: F, gap: f64) -> Result<(f64, f64)> {
    const SHRINK: f64 = 1.4;
    const SHRINK2: f64 = SHRINK * SHRINK;
    const LEVELS: usize = 10;
    const SAFE: f64 = 2.0;
    require_positive("gap", gap)?;
    let mut h = 0.1 * gap;
    if !(gap + h > gap && gap - h < gap) || h < f64::MIN_POSITIVE {
        return Err(Error::StepUnderflow { gap });
    }
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    table[0][0] = (f(gap + h)? - f(gap - h)?) / (2.0 * h);
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..LEVELS {
        h /= SHRINK;
        if !(gap + h > gap) {
            break;
        }
        table[0][i] = (f(gap + h)? - f(gap - h)?) / (2.0 * h);
        let mut fac = SHRINK2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK2;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    if !best.is_finite() {
        return Err(Error::StepUnderflow { gap });
    }
    Ok((best, err))
}

/// Estimated ratio `γ_T/|ω_T| ≈ 4·gap·ω_m/(λ_D σ)` of trapped-charge damping
/// to the trapped-charge frequency shift.
///
/// `σ` is taken in Gaussian units (Hz) exactly as quoted for aluminum; no
/// unit conversion is applied.
pub fn trapped_charge_damping_ratio(gap: f64, omega_m: f64, charge: &TrappedCharge) -> Result<f64> {
    require_positive("gap", gap)?;
    require_positive("omega_m", omega_m)?;
    require_positive("Debye length", charge.debye_length)?;
    require_positive("conductivity", charge.conductivity)?;
    Ok(4.0 * gap * omega_m / (charge.debye_length * charge.conductivity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coulomb(q: f64) -> ForceModel {
        ForceModel::coulomb_only(TrappedCharge {
            charge: q,
            ..TrappedCharge::reference()
        })
    }

    #[test]
    fn coulomb_reference_value() {
        let f = trapped_charge_force(1e-6, &TrappedCharge::reference()).unwrap();
        assert!((f - 2.72e-7).abs() < 0.005e-7, "{f}");
    }

    #[test]
    fn coulomb_zero_charge_and_inverse_square() {
        let zero = TrappedCharge {
            charge: 0.0,
            ..TrappedCharge::reference()
        };
        assert_eq!(trapped_charge_force(1e-6, &zero).unwrap(), 0.0);
        let c = TrappedCharge::reference();
        let ratio =
            trapped_charge_force(2e-6, &c).unwrap() / trapped_charge_force(1e-6, &c).unwrap();
        assert!((ratio - 0.25).abs() < 1e-15);
        assert!(trapped_charge_force(0.0, &c).is_err());
    }

    #[test]
    fn gradient_of_pure_coulomb_matches_analytic() {
        let model = coulomb(device::TRAPPED_CHARGE);
        for gap in [2e-7, 1e-6, 3e-6] {
            let analytic = 2.0 * trapped_charge_force(gap, &model.charge).unwrap() / gap;
            let fd = force_gradient(gap, &model).unwrap();
            assert!(
                (fd - analytic).abs() <= 1e-6 * analytic,
                "{gap}: {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn zero_force_model_has_zero_gradient() {
        assert_eq!(force_gradient(1e-6, &coulomb(0.0)).unwrap(), 0.0);
        assert_eq!(total_static_force(1e-6, &coulomb(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn step_underflow_is_reported() {
        let err = ridders_derivative(Ok, 1e-320).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }

    #[test]
    fn damping_ratio_values() {
        let c = TrappedCharge::reference();
        let w = device::omega_m();
        let r = trapped_charge_damping_ratio(1e-6, w, &c).unwrap();
        assert!((r - 1.88e-8).abs() < 0.005e-8, "{r}");
        let half = trapped_charge_damping_ratio(0.5e-6, w, &c).unwrap();
        assert!((half / r - 0.5).abs() < 1e-15);
        assert!(trapped_charge_damping_ratio(-1.0, w, &c).is_err());
        assert!(trapped_charge_damping_ratio(1e-6, 0.0, &c).is_err());
    }

    #[test]
    fn radius_enters_linearly() {
        let table = Arc::new(
            PressureTable::build(
                &PlatePairMaterials::reference(),
                &QuadratureSpec::default(),
                TableRange {
                    min_separation: 5e-8,
                    max_separation: 1e-4,
                    points_per_decade: 16,
                },
            )
            .unwrap(),
        );
        let a = ForceModel::reference().with_table(table.clone());
        let b = a.clone().with_radius(2.0 * a.geometry.radius);
        let fa = casimir_force(1e-7, &a).unwrap();
        let fb = casimir_force(1e-7, &b).unwrap();
        assert!((fb / fa - 2.0).abs() < 1e-14);
    }

    #[test]
    fn casimir_off_is_zero() {
        assert_eq!(casimir_force(1e-7, &coulomb(1e-14)).unwrap(), 0.0);
        assert_eq!(
            casimir_pressure_magnitude(1e-7, &coulomb(1e-14)).unwrap(),
            0.0
        );
    }
}
