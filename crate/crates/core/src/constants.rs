//! Physical constants (CODATA 2018, SI) and the reference parameter set of
//! the trampoline/fiber-dome device.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Elementary charge, C (also J per eV).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Casimir friction rate relative to the mechanical frequency, γ_C/ω_m.
///
/// Quoted from a published estimate for this device rather than computed;
/// seven orders of magnitude below the intrinsic damping, so it never enters
/// the force or damping balance.
pub const CASIMIR_FRICTION_RATIO: f64 = 1e-12;

/// Reference device parameters.
pub mod device {
    use super::PI;

    /// Refractive index of the silica graded-index fiber.
    pub const N_GIF: f64 = 1.49;
    /// Dielectric constant of the dome, n².
    pub const EPSILON: f64 = N_GIF * N_GIF;
    /// Aluminum plasma length c/2ω_p, m.
    pub const PLASMA_LENGTH: f64 = 6.2e-9;
    /// Approximate silica band gap, eV.
    pub const ENERGY_GAP_EV: f64 = 9.0;
    /// Cryostat temperature, K.
    pub const TEMPERATURE: f64 = 77.0;
    /// Dome radius, m.
    pub const DOME_RADIUS: f64 = 90e-6;
    /// Effective trapped charge, C.
    pub const TRAPPED_CHARGE: f64 = 1.1e-14;
    /// Aluminum Debye length, m.
    pub const DEBYE_LENGTH: f64 = 1.7e-10;
    /// Aluminum conductivity at 77 K in Gaussian units, Hz.
    pub const CONDUCTIVITY: f64 = 3.0e18;
    /// Effective mass of the fundamental mode, kg.
    pub const MASS: f64 = 1.3e-11;
    /// Intrinsic resonance frequency, Hz (ω_m = 2π × this).
    pub const FREQUENCY_HZ: f64 = 381.9e3;
    /// Intrinsic damping as printed ("1.5 Hz").
    pub const DAMPING_HZ: f64 = 1.5;
    /// Laser wavelength used for the reflection trace, m.
    pub const WAVELENGTH: f64 = 1545.525e-9;
    pub const BETA_PLUS: f64 = 0.3;
    pub const BETA_MINUS: f64 = 0.15;
    pub const FINESSE: f64 = 3.0;
    /// Grouped bolometric power scale ω_m²γ_Hλ/(θη), W.
    pub const POWER_SCALE: f64 = 3.3e-3;

    pub fn omega_m() -> f64 {
        2.0 * PI * FREQUENCY_HZ
    }
}
