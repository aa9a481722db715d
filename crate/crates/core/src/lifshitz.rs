//! Casimir pressure between a plasma-model metal plate and a dielectric plate.
//!
//! The pressure is the perfect-conductor-like prefactor
//! `-3ħc(ε-1) / (32π² d⁴)` times a dimensionless double integral `I_L(D, y)`
//! of the scaled separation `D = d/d_p` and the dielectric contrast
//! `y = ε - 1`. `I_L → 1` for `D → ∞, y → 0`.
//!
//! Throughout this module `p` is the ratio of the photon wave number to its
//! normal component (`p ≥ 1`) and `xi` is the scaled imaginary frequency
//! `2ξd/c`, the variable the kernel decays in as `e^{-xi}`.

use std::f64::consts::PI;

use crate::constants::{C, ELEMENTARY_CHARGE, HBAR, K_B};
use crate::error::{domain, require_positive, Error, Result};
use crate::quadrature::{integrate, Estimate, Tolerance};

/// Metal/dielectric pair entering the Lifshitz integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatePairMaterials {
    /// Relative dielectric constant of the dielectric plate (> 1).
    pub epsilon: f64,
    /// Plasma length `c / 2ω_p` of the metal, m.
    pub plasma_length: f64,
    /// Band gap of the dielectric, J.
    pub energy_gap: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl PlatePairMaterials {
    pub fn new(
        epsilon: f64,
        plasma_length: f64,
        energy_gap: f64,
        temperature: f64,
    ) -> Result<Self> {
        let m = Self {
            epsilon,
            plasma_length,
            energy_gap,
            temperature,
        };
        m.validate()?;
        Ok(m)
    }

    /// Silica dome against aluminum at 77 K.
    pub fn reference() -> Self {
        use crate::constants::device;
        Self {
            epsilon: device::EPSILON,
            plasma_length: device::PLASMA_LENGTH,
            energy_gap: device::ENERGY_GAP_EV * ELEMENTARY_CHARGE,
            temperature: device::TEMPERATURE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 1.0) {
            return Err(domain(format!(
                "epsilon must exceed 1, got {}",
                self.epsilon
            )));
        }
        require_positive("plasma length", self.plasma_length)?;
        require_positive("energy gap", self.energy_gap)?;
        require_positive("temperature", self.temperature)
    }

    /// Dielectric contrast `y = ε - 1`.
    pub fn contrast(&self) -> f64 {
        self.epsilon - 1.0
    }
}

/// Controls the nested adaptive evaluation of `I_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_floor: f64,
    pub max_subdivisions: usize,
    /// Upper limit of the `p` integral; `f64::INFINITY` integrates the full range.
    pub p_cutoff: f64,
    /// Upper limit of the `xi` integral.
    pub x_cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-6,
            absolute_floor: 1e-14,
            max_subdivisions: 2000,
            p_cutoff: f64::INFINITY,
            x_cutoff: 60.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance < 1.0) {
            return Err(domain(format!(
                "relative tolerance must lie in (0, 1), got {}",
                self.relative_tolerance
            )));
        }
        if !(self.absolute_floor >= 0.0) {
            return Err(domain("absolute floor must be non-negative"));
        }
        if self.max_subdivisions < 1 {
            return Err(domain("max_subdivisions must be at least 1"));
        }
        if !(self.p_cutoff > 1.0) || !(self.x_cutoff > 1.0 && self.x_cutoff.is_finite()) {
            return Err(domain(format!(
                "cutoffs must exceed 1 (p_cutoff {}, x_cutoff {})",
                self.p_cutoff, self.x_cutoff
            )));
        }
        Ok(())
    }

    fn with_relative(&self, relative: f64, absolute: f64) -> Tolerance {
        Tolerance {
            relative,
            absolute,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// The Lifshitz kernel at `(p, xi)` for scaled separation `d_ratio` and contrast `y`.
///
/// Evaluates `xi³/(3p²y) · [1/(ζs1 ζs2 e^xi − 1) + 1/(ζp1 ζp2 e^xi − 1)]`.
/// The reflection factors are computed from algebraically identical forms
/// that avoid the cancellation in `1 − √(1+u²)` and `p − √(p²+y)`, and
/// the Bose-like factor is written with `e^{-xi}` so large `xi` decays to 0.
pub fn lifshitz_integrand(p: f64, xi: f64, d_ratio: f64, y: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain(format!("p must be finite and >= 1, got {p}")));
    }
    require_positive("xi", xi)?;
    require_positive("D", d_ratio)?;
    require_positive("y", y)?;
    Ok(kernel(p, xi, d_ratio, y))
}

#[inline]
pub(crate) fn kernel(p: f64, xi: f64, d_ratio: f64, y: f64) -> f64 {
    let decay = (-xi).exp();
    if decay == 0.0 {
        return 0.0;
    }
    let u = d_ratio / xi;
    let w = 1f64.hypot(u);
    let s = p.hypot(y.sqrt());
    // |ζs1| = ((1+w)/u)², |ζs2| = (p+s)²/y; both factors are negative.
    let metal_s = ((1.0 + w) / u).powi(2);
    let dielectric_s = (p + s).powi(2) / y;
    let z_s = metal_s * dielectric_s;
    // ζp1 = (1+v²+w)² / (u²(2p²−1+p²v²)), v = pu
    let v = p * u;
    let metal_p = ((1.0 + v * v + w) / u).powi(2) / (2.0 * p * p - 1.0 + p * p * v * v);
    // ζp2 = ((1+y)p+s)² / (y(p²(2+y)−1))
    let dielectric_p = ((1.0 + y) * p + s).powi(2) / (y * (p * p * (2.0 + y) - 1.0));
    let z_p = metal_p * dielectric_p;
    let bose = decay / (z_s - decay) + decay / (z_p - decay);
    xi * xi * xi / (3.0 * p * p * y) * bose
}

/// Evaluates `I_L(D, y)` by nested adaptive Gauss–Kronrod quadrature.
///
/// The inner integral runs over `xi ∈ [0, x_cutoff]`, the outer one over
/// `t = 1/p ∈ [1/p_cutoff, 1]`. The reported error combines the outer
/// estimate with the worst inner relative error.
pub fn lifshitz_integral(d_ratio: f64, y: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    require_positive("D", d_ratio)?;
    require_positive("y", y)?;
    spec.validate()?;
    let inner_tol = spec.with_relative(0.1 * spec.relative_tolerance, 0.1 * spec.absolute_floor);
    let outer_tol = spec.with_relative(0.5 * spec.relative_tolerance, 0.5 * spec.absolute_floor);
    let t_min = if spec.p_cutoff.is_finite() {
        1.0 / spec.p_cutoff
    } else {
        0.0
    };

    let mut worst_inner = 0.0f64;
    let mut inner_failure: Option<Error> = None;
    let outer = integrate(
        |t| {
            if inner_failure.is_some() {
                return 0.0;
            }
            let p = 1.0 / t;
            match integrate(
                |xi| kernel(p, xi, d_ratio, y),
                0.0,
                spec.x_cutoff,
                inner_tol,
            ) {
                Ok(est) => {
                    if est.value != 0.0 {
                        worst_inner = worst_inner.max(est.error / est.value.abs());
                    }
                    est.value / (t * t)
                }
                Err(e) => {
                    inner_failure = Some(e);
                    0.0
                }
            }
        },
        t_min,
        1.0,
        outer_tol,
    );
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let outer = outer?;
    Ok(Estimate {
        value: outer.value,
        error: outer.error + worst_inner * outer.value.abs(),
        subdivisions: outer.subdivisions,
    })
}

/// `-3ħc(ε−1) / (32π² d⁴)`: the pressure for `I_L = 1`, in Pa.
pub fn pressure_prefactor(d: f64, epsilon: f64) -> f64 {
    -3.0 * HBAR * C * (epsilon - 1.0) / (32.0 * PI * PI * d.powi(4))
}

/// Casimir pressure at separation `d` (negative: attractive), in Pa.
///
/// Logs a warning when `d` lies outside the validity window of the
/// zero-temperature, non-absorbing approximation.
pub fn casimir_pressure(
    d: f64,
    materials: &PlatePairMaterials,
    spec: &QuadratureSpec,
) -> Result<f64> {
    require_positive("separation", d)?;
    materials.validate()?;
    let (d_min, d_max) = validity_window(materials)?;
    if d < d_min || d > d_max {
        log::warn!("separation {d:e} m outside Lifshitz validity window [{d_min:e}, {d_max:e}] m");
    }
    let i_l = lifshitz_integral(d / materials.plasma_length, materials.contrast(), spec)?;
    Ok(pressure_prefactor(d, materials.epsilon) * i_l.value)
}

/// Separations `(ħc/Δ_D, ħc/k_B T)` bounding the validity of the pressure model, in m.
pub fn validity_window(materials: &PlatePairMaterials) -> Result<(f64, f64)> {
    require_positive("energy gap", materials.energy_gap)?;
    require_positive("temperature", materials.temperature)?;
    let hbar_c = HBAR * C;
    Ok((
        hbar_c / materials.energy_gap,
        hbar_c / (K_B * materials.temperature),
    ))
}
