//! Complex frequency shift of the mechanical mode induced by a force that
//! reaches the mirror through a first-order ancilla (thermal relaxation,
//! charge redistribution, ...).
//!
//! The complex frequency is written `Υ = ω − iγ`. For a static force
//! gradient `F′` (with respect to the displacement, attractive positive)
//! relayed with ancilla decay rate `γ_s`,
//!
//! ```text
//! Υ_s = ∓ γ_s F′ / (2 m ω_m) · 1/(γ_s ± i ω_m)
//! ```
//!
//! [`ShiftConvention::Softening`] (the default) is the lowest-order
//! solution of `m ẍ = −m ω_m² x + F`, `Ḟ = γ_s (F_s(x) − F)` for
//! `x ∝ e^{−iΥt}`: a positive gradient lowers the frequency. Its damping part
//! coincides with [`ShiftConvention::Literal`], the expression
//! `+γ_s F′/(2mω_m) · 1/(γ_s + iω_m)` read with the same sign convention,
//! which differs only in the sign of the frequency shift.

use crate::constants::device;
use crate::error::{domain, require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    /// Effective mass, kg.
    pub mass: f64,
    /// Intrinsic angular frequency ω_m, rad/s.
    pub omega_m: f64,
    /// Intrinsic damping rate γ_m, rad/s.
    pub gamma_m: f64,
}

impl MechanicalMode {
    pub fn new(mass: f64, omega_m: f64, gamma_m: f64) -> Result<Self> {
        let m = Self {
            mass,
            omega_m,
            gamma_m,
        };
        m.validate()?;
        Ok(m)
    }

    /// Trampoline fundamental mode; the quoted 1.5 Hz damping is read as a
    /// cyclic rate, `γ_m = 2π·1.5 s⁻¹`.
    pub fn reference() -> Self {
        Self {
            mass: device::MASS,
            omega_m: device::omega_m(),
            gamma_m: 2.0 * std::f64::consts::PI * device::DAMPING_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("mass", self.mass)?;
        require_positive("omega_m", self.omega_m)?;
        require_positive("gamma_m", self.gamma_m)?;
        if self.gamma_m >= self.omega_m / 100.0 {
            return Err(domain(format!(
                "weak damping required: gamma_m {} must be below omega_m/100 = {}",
                self.gamma_m,
                self.omega_m / 100.0
            )));
        }
        Ok(())
    }

    /// Spring constant `m ω_m²`, N/m.
    pub fn stiffness(&self) -> f64 {
        self.mass * self.omega_m * self.omega_m
    }
}

/// Ancilla decay rate and the static force gradient it relays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaCoupling {
    /// γ_s, rad/s.
    pub gamma_s: f64,
    /// F_s′(x_f), N/m.
    pub force_gradient: f64,
}

/// `Υ = ω_shift − i γ_added`, both in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexFrequencyShift {
    pub omega_shift: f64,
    pub gamma_added: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftConvention {
    #[default]
    Softening,
    Literal,
}

/// Lowest-order back-reaction shift `Υ_s` of the mode.
pub fn upsilon_s(
    coupling: &AncillaCoupling,
    mode: &MechanicalMode,
    convention: ShiftConvention,
) -> Result<ComplexFrequencyShift> {
    require_positive("gamma_s", coupling.gamma_s)?;
    if !coupling.force_gradient.is_finite() {
        return Err(domain("force gradient must be finite"));
    }
    let (g, w) = (coupling.gamma_s, mode.omega_m);
    let amplitude = coupling.force_gradient / (2.0 * mode.mass * w);
    // γ_s/(γ_s + iω) = γ_s(γ_s − iω)/(γ_s² + ω²), ratios formed to avoid overflow
    let (real, imag) = if g >= w {
        let r = w / g;
        let den = 1.0 + r * r;
        (1.0 / den, -r / den)
    } else {
        let r = g / w;
        let den = 1.0 + r * r;
        (r * r / den, -r / den)
    };
    let literal_omega = amplitude * real;
    let gamma_added = -amplitude * imag;
    let omega_shift = match convention {
        ShiftConvention::Softening => -literal_omega,
        ShiftConvention::Literal => literal_omega,
    };
    Ok(ComplexFrequencyShift {
        omega_shift,
        gamma_added,
    })
}

/// Frequency of the mode softened by a static gradient, with the first-order
/// approximation alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticFrequency {
    /// `ω_m √(1 − F′/(mω_m²))`, rad/s.
    pub exact: f64,
    /// `ω_m − F′/(2mω_m)`, rad/s.
    pub first_order: f64,
}

/// Mode frequency in the instantaneous-ancilla limit.
pub fn effective_frequency_static(mode: &MechanicalMode, gradient: f64) -> Result<StaticFrequency> {
    if !gradient.is_finite() {
        return Err(domain("force gradient must be finite"));
    }
    let k = mode.stiffness();
    let margin = 1.0 - gradient / k;
    if margin <= 0.0 {
        return Err(Error::PullIn {
            d: f64::NAN,
            max_residual: gradient - k,
        });
    }
    Ok(StaticFrequency {
        exact: mode.omega_m * margin.sqrt(),
        first_order: mode.omega_m - gradient / (2.0 * mode.mass * mode.omega_m),
    })
}
