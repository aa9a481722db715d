//! Fiber-Bragg / trampoline cavity: intracavity intensity factor, steady
//! state reflection probability and the photodetector trace.

use std::f64::consts::PI;

use crate::constants::device;
use crate::error::{domain, require_positive, Result};

/// Parameters of the low-finesse cavity response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityModel {
    /// Laser wavelength λ, m.
    pub wavelength: f64,
    /// Finesse β_F.
    pub finesse: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// Mirror displacement of maximal stored energy, m.
    pub x_r: f64,
}

impl CavityModel {
    pub fn new(
        wavelength: f64,
        finesse: f64,
        beta_plus: f64,
        beta_minus: f64,
        x_r: f64,
    ) -> Result<Self> {
        let c = Self {
            wavelength,
            finesse,
            beta_plus,
            beta_minus,
            x_r,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn reference() -> Self {
        Self {
            wavelength: device::WAVELENGTH,
            finesse: device::FINESSE,
            beta_plus: device::BETA_PLUS,
            beta_minus: device::BETA_MINUS,
            x_r: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("wavelength", self.wavelength)?;
        require_positive("finesse", self.finesse)?;
        if !(self.beta_minus > 0.0
            && self.beta_minus < self.beta_plus
            && self.beta_plus.is_finite())
        {
            return Err(domain(format!(
                "cavity requires 0 < beta_minus < beta_plus, got beta_plus {} beta_minus {}",
                self.beta_plus, self.beta_minus
            )));
        }
        if !self.x_r.is_finite() {
            return Err(domain("x_r must be finite"));
        }
        Ok(())
    }

    /// Copy with the resonance reference moved to `x_r`.
    pub fn centered_at(&self, x_r: f64) -> Self {
        Self { x_r, ..*self }
    }

    /// Resonant intensity factor `β_F(1 − β₋²/β₊²)`.
    fn peak_numerator(&self) -> f64 {
        let bp2 = self.beta_plus * self.beta_plus;
        self.finesse * (1.0 - self.beta_minus * self.beta_minus / bp2) * bp2
    }

    fn phase(&self, x: f64) -> f64 {
        4.0 * PI * (x - self.x_r) / self.wavelength
    }
}

/// Photon escape probabilities through the fiber reflector, by absorption
/// in the metal mirror and by radiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorTransmissions {
    pub t_b: f64,
    pub t_a: f64,
    pub t_rad: f64,
}

impl MirrorTransmissions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T_B", self.t_b), ("T_A", self.t_a), ("T_R", self.t_rad)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// `β± = |T_B ± T_A ± T_R| / √8`.
///
/// Fails when the mirror losses exceed the fiber transmission
/// (`T_B < T_A + T_R`): `T_B − T_A − T_R` would then be negative and the
/// ordering `β₋ < β₊` would rest on the absolute value alone. The lossless
/// case `T_A = T_R = 0` returns `β₊ = β₋`, which [`CavityModel`] rejects.
pub fn betas_from_transmissions(t: &MirrorTransmissions) -> Result<(f64, f64)> {
    t.validate()?;
    let losses = t.t_a + t.t_rad;
    if t.t_b < losses {
        return Err(domain(format!(
            "inconsistent transmissions: T_B {} below losses T_A + T_R = {losses}",
            t.t_b
        )));
    }
    let plus = (t.t_b + losses) / 8f64.sqrt();
    let minus = (t.t_b - losses) / 8f64.sqrt();
    Ok((plus, minus))
}

/// Intracavity power factor
/// `I(x) = β_F(1 − β₋²/β₊²)β₊² / (1 − cos(4π x_D/λ) + β₊²)`, `x_D = x − x_R`.
pub fn intensity(x: f64, cavity: &CavityModel) -> f64 {
    let bp2 = cavity.beta_plus * cavity.beta_plus;
    cavity.peak_numerator() / (1.0 - cavity.phase(x).cos() + bp2)
}

/// Steady-state reflection probability `R_C = 1 − I(x)/β_F`.
pub fn reflection(x: f64, cavity: &CavityModel) -> f64 {
    1.0 - intensity(x, cavity) / cavity.finesse
}

/// Analytic `dI/dx`, 1/m.
pub fn intensity_slope(x: f64, cavity: &CavityModel) -> f64 {
    let bp2 = cavity.beta_plus * cavity.beta_plus;
    let phase = cavity.phase(x);
    let den = 1.0 - phase.cos() + bp2;
    -cavity.peak_numerator() * phase.sin() * (4.0 * PI / cavity.wavelength) / (den * den)
}

/// Photodetector voltage `offset + gain·R_C(x)` along a cavity-length grid.
pub fn pd_trace(
    positions: &[f64],
    cavity: &CavityModel,
    gain: f64,
    offset: f64,
) -> Result<Vec<f64>> {
    if positions.is_empty() {
        return Err(domain(
            "photodetector trace needs a non-empty position grid",
        ));
    }
    cavity.validate()?;
    Ok(positions
        .iter()
        .map(|&x| offset + gain * reflection(x, cavity))
        .collect())
}
