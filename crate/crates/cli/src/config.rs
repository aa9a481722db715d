//! Run configuration: one TOML file holding every model parameter, with
//! defaults for the reference device. All values are SI unless the key
//! name says otherwise.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use optomech::backreaction::MechanicalMode;
use optomech::calibrate::SeriesKind;
use optomech::cavity::CavityModel;
use optomech::constants::{device, ELEMENTARY_CHARGE};
use optomech::lifshitz::{PlatePairMaterials, QuadratureSpec};
use optomech::proximity::{CasimirTerm, ForceModel, SphereGeometry, TableRange, TrappedCharge};
use optomech::seo::{BolometricParams, SeoModel};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub materials: MaterialsConfig,
    pub quadrature: QuadratureConfig,
    pub geometry: GeometryConfig,
    pub charge: ChargeConfig,
    pub casimir: CasimirConfig,
    pub mechanics: MechanicsConfig,
    pub cavity: CavityConfig,
    pub bolometric: BolometricConfig,
    pub pressure: GridConfig,
    pub force: GridConfig,
    pub pdtrace: PdTraceConfig,
    pub freqsweep: GridConfig,
    pub pullin: PullInConfig,
    pub seomap: SeoMapConfig,
    pub fit: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            materials: MaterialsConfig::default(),
            quadrature: QuadratureConfig::default(),
            geometry: GeometryConfig::default(),
            charge: ChargeConfig::default(),
            casimir: CasimirConfig::default(),
            mechanics: MechanicsConfig::default(),
            cavity: CavityConfig::default(),
            bolometric: BolometricConfig::default(),
            pressure: GridConfig {
                min: 10e-9,
                max: 10e-6,
                points: 100,
                spacing: Spacing::Log,
            },
            force: GridConfig {
                min: 20e-9,
                max: 10e-6,
                points: 100,
                spacing: Spacing::Log,
            },
            pdtrace: PdTraceConfig::default(),
            freqsweep: GridConfig {
                min: 0.2e-6,
                max: 4e-6,
                points: 200,
                spacing: Spacing::Linear,
            },
            pullin: PullInConfig::default(),
            seomap: SeoMapConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub epsilon: f64,
    pub plasma_length: f64,
    pub energy_gap_ev: f64,
    pub temperature: f64,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        Self {
            epsilon: device::EPSILON,
            plasma_length: device::PLASMA_LENGTH,
            energy_gap_ev: device::ENERGY_GAP_EV,
            temperature: device::TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub relative_tolerance: f64,
    pub absolute_floor: f64,
    pub max_subdivisions: usize,
    /// `inf` integrates the full momentum range.
    pub p_cutoff: f64,
    pub x_cutoff: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self {
            relative_tolerance: q.relative_tolerance,
            absolute_floor: q.absolute_floor,
            max_subdivisions: q.max_subdivisions,
            p_cutoff: q.p_cutoff,
            x_cutoff: q.x_cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub radius: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            radius: device::DOME_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeConfig {
    pub q_t: f64,
    pub debye_length: f64,
    /// Gaussian units, Hz.
    pub conductivity: f64,
}

impl Default for ChargeConfig {
    fn default() -> Self {
        let c = TrappedCharge::reference();
        Self {
            q_t: c.charge,
            debye_length: c.debye_length,
            conductivity: c.conductivity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasimirMode {
    Off,
    Direct,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CasimirConfig {
    pub mode: CasimirMode,
    pub table_min: f64,
    pub table_max: f64,
    pub points_per_decade: usize,
}

impl Default for CasimirConfig {
    fn default() -> Self {
        let r = TableRange::default();
        Self {
            mode: CasimirMode::Tabulated,
            table_min: r.min_separation,
            table_max: r.max_separation,
            points_per_decade: r.points_per_decade,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingUnits {
    /// Cyclic rate; multiplied by 2π.
    Hz,
    /// Already in rad/s.
    Angular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanicsConfig {
    pub mass: f64,
    pub frequency_hz: f64,
    pub damping: f64,
    pub damping_units: DampingUnits,
}

impl Default for MechanicsConfig {
    fn default() -> Self {
        Self {
            mass: device::MASS,
            frequency_hz: device::FREQUENCY_HZ,
            damping: device::DAMPING_HZ,
            damping_units: DampingUnits::Hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub wavelength: f64,
    pub finesse: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub x_r: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        let c = CavityModel::reference();
        Self {
            wavelength: c.wavelength,
            finesse: c.finesse,
            beta_plus: c.beta_plus,
            beta_minus: c.beta_minus,
            x_r: c.x_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BolometricConfig {
    pub power_scale: f64,
    pub gamma_h_ratio: f64,
    pub theta_sign: f64,
    /// Gap at which the cavity is resonant.
    pub resonance_gap: f64,
}

impl Default for BolometricConfig {
    fn default() -> Self {
        let b = BolometricParams::reference();
        Self {
            power_scale: b.power_scale,
            gamma_h_ratio: b.gamma_h_ratio,
            theta_sign: b.theta_sign,
            resonance_gap: 0.5 * device::WAVELENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 1e-6,
            max: 2e-6,
            points: 10,
            spacing: Spacing::Linear,
        }
    }
}

impl GridConfig {
    pub fn values(&self, path: &str) -> Result<Vec<f64>, CliError> {
        if self.points < 2 {
            return Err(CliError::config(format!(
                "{path}.points must be at least 2"
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(CliError::config(format!("{path}: need finite min < max")));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(CliError::config(format!(
                "{path}.min must be positive for log spacing"
            )));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => self.min * (self.max / self.min).powf(t),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdTraceConfig {
    pub grid: GridConfig,
    pub pd_gain: f64,
    pub pd_offset: f64,
}

impl Default for PdTraceConfig {
    fn default() -> Self {
        let l = device::WAVELENGTH;
        Self {
            grid: GridConfig {
                min: -0.25 * l,
                max: 0.75 * l,
                points: 1001,
                spacing: Spacing::Linear,
            },
            pd_gain: 1.0,
            pd_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PullInConfig {
    pub bracket_min: f64,
    pub bracket_max: f64,
    /// Frequency ratio whose distance is also reported.
    pub target_ratio: f64,
    pub target_max: f64,
}

impl Default for PullInConfig {
    fn default() -> Self {
        Self {
            bracket_min: 0.1e-6,
            bracket_max: 1e-6,
            target_ratio: 0.87,
            target_max: 4e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeoMapConfig {
    pub distance: GridConfig,
    pub power: GridConfig,
}

impl Default for SeoMapConfig {
    fn default() -> Self {
        Self {
            distance: GridConfig {
                min: 0.4e-6,
                max: 2.0e-6,
                points: 161,
                spacing: Spacing::Linear,
            },
            power: GridConfig {
                min: 0.0,
                max: 6e-9,
                points: 61,
                spacing: Spacing::Linear,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    FrequencyVsDistance,
    PdTrace,
}

impl From<FitKind> for SeriesKind {
    fn from(k: FitKind) -> Self {
        match k {
            FitKind::FrequencyVsDistance => SeriesKind::FrequencyVsDistance,
            FitKind::PdTrace => SeriesKind::PdTrace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub kind: FitKind,
    /// Headed CSV with the measured series; relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub free: Vec<String>,
    pub initial: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kind: FitKind::FrequencyVsDistance,
            data: None,
            free: vec!["q_t".into()],
            initial: BTreeMap::new(),
            bounds: BTreeMap::new(),
            max_iterations: 2000,
        }
    }
}

fn at<T>(path: &str, r: optomech::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::config(format!("{path}: {e}")))
}

impl RunConfig {
    /// Parses TOML text, applies `key=value` overrides and validates.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let file: toml::Table = toml::from_str(text)
            .map_err(|e| CliError::config(format!("cannot parse config: {e}")))?;
        // Layer onto the defaults so a partial nested table keeps its
        // section-specific defaults rather than the generic ones
        let mut tree = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        merge(&mut tree, file);
        for item in overrides {
            apply_override(&mut tree, item)?;
        }
        let cfg: RunConfig =
            toml::Value::Table(tree)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    CliError::config(format!("invalid config: {}", e.message()))
                })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        Self::load(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// Checks every module invariant, naming the offending section.
    pub fn validate(&self) -> Result<(), CliError> {
        at("materials", self.materials().validate())?;
        at("quadrature", self.quadrature().validate())?;
        at(
            "geometry",
            SphereGeometry::new(self.geometry.radius).map(|_| ()),
        )?;
        at("charge", self.charge().validate())?;
        at("mechanics", self.mode().and_then(|m| m.validate()))?;
        at("cavity", self.cavity().validate())?;
        at("bolometric", self.bolometric().validate())?;
        if !self.bolometric.resonance_gap.is_finite() {
            return Err(CliError::config("bolometric.resonance_gap must be finite"));
        }
        let c = &self.casimir;
        if !(c.table_min > 0.0 && c.table_max > c.table_min && c.points_per_decade >= 2) {
            return Err(CliError::config(
                "casimir: need 0 < table_min < table_max and points_per_decade >= 2",
            ));
        }
        Ok(())
    }

    pub fn materials(&self) -> PlatePairMaterials {
        let m = &self.materials;
        PlatePairMaterials {
            epsilon: m.epsilon,
            plasma_length: m.plasma_length,
            energy_gap: m.energy_gap_ev * ELEMENTARY_CHARGE,
            temperature: m.temperature,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        let q = &self.quadrature;
        QuadratureSpec {
            relative_tolerance: q.relative_tolerance,
            absolute_floor: q.absolute_floor,
            max_subdivisions: q.max_subdivisions,
            p_cutoff: q.p_cutoff,
            x_cutoff: q.x_cutoff,
        }
    }

    pub fn charge(&self) -> TrappedCharge {
        TrappedCharge {
            charge: self.charge.q_t,
            debye_length: self.charge.debye_length,
            conductivity: self.charge.conductivity,
        }
    }

    /// Force model; builds the pressure table when tabulation is enabled.
    pub fn force_model(&self) -> Result<ForceModel, CliError> {
        let mut m = at(
            "force model",
            ForceModel::new(
                SphereGeometry {
                    radius: self.geometry.radius,
                },
                self.charge(),
                self.materials(),
                self.quadrature(),
            ),
        )?;
        match self.casimir.mode {
            CasimirMode::Off => m.casimir = CasimirTerm::Off,
            CasimirMode::Direct => {}
            CasimirMode::Tabulated => {
                let range = TableRange {
                    min_separation: self.casimir.table_min,
                    max_separation: self.casimir.table_max,
                    points_per_decade: self.casimir.points_per_decade,
                };
                m = m.tabulated(range).map_err(CliError::Numerical)?;
            }
        }
        Ok(m)
    }

    pub fn mode(&self) -> optomech::Result<MechanicalMode> {
        let m = &self.mechanics;
        let omega = 2.0 * std::f64::consts::PI * m.frequency_hz;
        let gamma = match m.damping_units {
            DampingUnits::Hz => 2.0 * std::f64::consts::PI * m.damping,
            DampingUnits::Angular => m.damping,
        };
        MechanicalMode::new(m.mass, omega, gamma)
    }

    pub fn cavity(&self) -> CavityModel {
        let c = &self.cavity;
        CavityModel {
            wavelength: c.wavelength,
            finesse: c.finesse,
            beta_plus: c.beta_plus,
            beta_minus: c.beta_minus,
            x_r: c.x_r,
        }
    }

    pub fn bolometric(&self) -> BolometricParams {
        let b = &self.bolometric;
        BolometricParams {
            power_scale: b.power_scale,
            gamma_h_ratio: b.gamma_h_ratio,
            theta_sign: b.theta_sign,
        }
    }

    pub fn seo_model(&self) -> Result<SeoModel, CliError> {
        Ok(SeoModel {
            force: self.force_model()?,
            cavity: self.cavity(),
            bolometric: self.bolometric(),
            mode: at("mechanics", self.mode())?,
            resonance_gap: self.bolometric.resonance_gap,
        })
    }
}

/// `section.key=value`; the value is read as a TOML literal, falling back
/// to a bare string.
fn merge(base: &mut toml::Table, layer: toml::Table) {
    for (key, value) in layer {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(l)) => merge(b, l),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn apply_override(tree: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| {
        CliError::config(format!("override `{item}` is not of the form key=value"))
    })?;
    let key = key.trim();
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!(
            "override key `{key}` is malformed"
        )));
    }
    let mut node = tree;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            CliError::config(format!("override key `{key}`: `{part}` is not a section"))
        })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
