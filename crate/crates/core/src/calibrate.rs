//! Least-squares calibration of the forward models against measured series.
//!
//! Frequency-versus-distance data are fitted with a bounded simplex search
//! (each evaluation runs the full force balance); photodetector traces use
//! Levenberg–Marquardt, the reflection model being cheap and smooth.
//!
//! Parameters are addressed by name. Not every name is identifiable from
//! every data kind: the Coulomb model depends on `q_t` and `mass` only
//! through `q_t²/mass`, and `radius` enters only through the Casimir term,
//! which is orders of magnitude below the Coulomb force at micron gaps.

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::backreaction::MechanicalMode;
use crate::cavity::{pd_trace, CavityModel};
use crate::equilibrium::solve_fixed_point;
use crate::error::{domain, Error, Result};
use crate::optimize::{self, Options};
use crate::proximity::{ForceModel, SphereGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// Distance (m) against `ω_f/ω_m`.
    FrequencyVsDistance,
    /// Piezo voltage (V) against photodetector voltage (V).
    PdTrace,
}

impl SeriesKind {
    /// CSV column names of the abscissa and the ordinate.
    pub fn columns(self) -> (&'static str, &'static str) {
        match self {
            SeriesKind::FrequencyVsDistance => ("d_m", "omega_ratio"),
            SeriesKind::PdTrace => ("piezo_v", "pd_v"),
        }
    }
}

/// Optional per-point uncertainty column.
pub const SIGMA_COLUMN: &str = "sigma";

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSeries {
    pub kind: SeriesKind,
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl MeasuredSeries {
    pub fn new(
        kind: SeriesKind,
        abscissa: Vec<f64>,
        ordinate: Vec<f64>,
        sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        if abscissa.len() != ordinate.len()
            || sigma.as_ref().is_some_and(|s| s.len() != abscissa.len())
        {
            return Err(Error::Input(
                "columns of a measured series must have equal length".into(),
            ));
        }
        if abscissa.is_empty() {
            return Err(Error::Input("measured series is empty".into()));
        }
        if abscissa.iter().chain(&ordinate).any(|v| !v.is_finite()) {
            return Err(Error::Input(
                "measured series contains non-finite values".into(),
            ));
        }
        if let Some(s) = &sigma {
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Input("sigma values must be positive".into()));
            }
        }
        Ok(Self {
            kind,
            abscissa,
            ordinate,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    fn sigma_at(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s[i])
    }

    /// Reads a headed CSV; columns are located by name, extra columns are
    /// ignored.
    pub fn from_csv<R: Read>(kind: SeriesKind, reader: R) -> Result<Self> {
        let (xc, yc) = kind.columns();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Input(format!("cannot read CSV header: {e}")))?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let (Some(xi), Some(yi)) = (find(xc), find(yc)) else {
            return Err(Error::Input(format!(
                "CSV header must name columns `{xc}` and `{yc}` (optional `{SIGMA_COLUMN}`), found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        };
        let si = find(SIGMA_COLUMN);
        let (mut xs, mut ys, mut ss) = (Vec::new(), Vec::new(), Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Input(format!("CSV row {}: {e}", row + 2)))?;
            let field = |i: usize| -> Result<f64> {
                let raw = record.get(i).unwrap_or("");
                raw.parse().map_err(|_| {
                    Error::Input(format!(
                        "CSV row {}: cannot parse `{raw}` as a number",
                        row + 2
                    ))
                })
            };
            xs.push(field(xi)?);
            ys.push(field(yi)?);
            if let Some(i) = si {
                ss.push(field(i)?);
            }
        }
        Self::new(kind, xs, ys, si.map(|_| ss))
    }

    /// Row order sorted by abscissa (ties by ordinate), so that fits do not
    /// depend on the order rows were supplied in.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.abscissa[a]
                .total_cmp(&self.abscissa[b])
                .then(self.ordinate[a].total_cmp(&self.ordinate[b]))
                .then(self.sigma_at(a).total_cmp(&self.sigma_at(b)))
        });
        idx
    }
}

/// Which parameters move, where they start and their box constraints.
/// Parameters absent from `initial` start at the model defaults; absent
/// bounds are unbounded. A parameter starting at zero is searched on the
/// scale of its bounds, or on a model-specific natural scale.
#[derive(Debug, Clone, Default)]
pub struct FitSpec {
    pub free: Vec<String>,
    pub initial: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub max_iterations: Option<usize>,
}

impl FitSpec {
    pub fn new<S: AsRef<str>>(free: &[S]) -> Self {
        Self {
            free: free.iter().map(|s| s.as_ref().to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn initial(mut self, name: &str, value: f64) -> Self {
        self.initial.insert(name.to_string(), value);
        self
    }

    pub fn bounds(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.bounds.insert(name.to_string(), (lo, hi));
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Every model parameter, free or fixed, at the returned point.
    pub parameters: BTreeMap<String, f64>,
    pub free: Vec<String>,
    /// `√Σ((model − y)/σ)²`.
    pub residual_norm: f64,
    /// Weighted residuals in the order the rows were supplied.
    pub residuals: Vec<f64>,
    /// `s²(JᵀJ)⁻¹` over the free parameters; only for converged,
    /// non-degenerate fits.
    pub covariance: Option<DMatrix<f64>>,
    /// The free parameters are not all identifiable at the optimum.
    pub degenerate: bool,
    pub converged: bool,
    pub iterations: usize,
    /// `Σ r²` after each iteration.
    pub residual_history: Vec<f64>,
}

/// Forward model for `ω_f/ω_m` against the nominal distance.
///
/// Parameters: `q_t` (C), `radius` (m), `d_offset` (m, added to every
/// distance) and `mass` (kg, at fixed `ω_m`).
#[derive(Debug, Clone)]
pub struct FrequencyModel {
    pub force: ForceModel,
    pub mode: MechanicalMode,
}

impl FrequencyModel {
    pub const PARAMETERS: [&'static str; 4] = ["q_t", "radius", "d_offset", "mass"];

    pub fn defaults(&self) -> BTreeMap<String, f64> {
        [
            ("q_t", self.force.charge.charge),
            ("radius", self.force.geometry.radius),
            ("d_offset", 0.0),
            ("mass", self.mode.mass),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// `ω_f/ω_m` at each distance; fails if any point has pulled in.
    pub fn predict(&self, params: &BTreeMap<String, f64>, distances: &[f64]) -> Result<Vec<f64>> {
        let force = self
            .force
            .clone()
            .with_charge(params["q_t"])
            .with_radius(params["radius"]);
        force.charge.validate()?;
        SphereGeometry::new(params["radius"])?;
        let mode = MechanicalMode {
            mass: params["mass"],
            ..self.mode
        };
        mode.validate()?;
        let offset = params["d_offset"];
        distances
            .par_iter()
            .map(|&d| solve_fixed_point(d + offset, &force, &mode).map(|fp| fp.frequency_ratio()))
            .collect()
    }
}

/// Forward model for the photodetector voltage against piezo voltage:
/// `pd_offset + pd_gain·R_C(piezo_gain·V)`.
///
/// Parameters: `beta_plus`, `beta_minus`, `x_r` (m), `piezo_gain` (m/V),
/// `pd_gain` (V), `pd_offset` (V). Wavelength and finesse are fixed.
#[derive(Debug, Clone)]
pub struct PdTraceModel {
    pub cavity: CavityModel,
    pub piezo_gain: f64,
    pub pd_gain: f64,
    pub pd_offset: f64,
}

impl PdTraceModel {
    pub const PARAMETERS: [&'static str; 6] = [
        "beta_plus",
        "beta_minus",
        "x_r",
        "piezo_gain",
        "pd_gain",
        "pd_offset",
    ];

    pub fn new(cavity: CavityModel) -> Self {
        Self {
            cavity,
            piezo_gain: 1.0,
            pd_gain: 1.0,
            pd_offset: 0.0,
        }
    }

    pub fn defaults(&self) -> BTreeMap<String, f64> {
        [
            ("beta_plus", self.cavity.beta_plus),
            ("beta_minus", self.cavity.beta_minus),
            ("x_r", self.cavity.x_r),
            ("piezo_gain", self.piezo_gain),
            ("pd_gain", self.pd_gain),
            ("pd_offset", self.pd_offset),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn predict(&self, params: &BTreeMap<String, f64>, volts: &[f64]) -> Result<Vec<f64>> {
        let cavity = CavityModel::new(
            self.cavity.wavelength,
            self.cavity.finesse,
            params["beta_plus"],
            params["beta_minus"],
            params["x_r"],
        )?;
        let gain = params["piezo_gain"];
        let positions: Vec<f64> = volts.iter().map(|v| gain * v).collect();
        pd_trace(&positions, &cavity, params["pd_gain"], params["pd_offset"])
    }
}

/// Free-parameter bookkeeping shared by both fits.
struct Layout {
    names: Vec<String>,
    base: BTreeMap<String, f64>,
    scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    u0: Vec<f64>,
}

impl Layout {
    fn new(
        spec: &FitSpec,
        known: &[&str],
        defaults: BTreeMap<String, f64>,
        natural_scale: &dyn Fn(&str) -> f64,
        points: usize,
    ) -> Result<Self> {
        let mut base = defaults;
        for (name, &v) in &spec.initial {
            if !known.contains(&name.as_str()) {
                return Err(Error::Precondition(format!(
                    "unknown parameter `{name}`; expected one of {known:?}"
                )));
            }
            base.insert(name.clone(), v);
        }
        for name in spec.bounds.keys() {
            if !spec.free.contains(name) {
                return Err(Error::Precondition(format!(
                    "bounds given for parameter `{name}` that is not free"
                )));
            }
        }
        let mut names: Vec<String> = Vec::new();
        for name in &spec.free {
            if !known.contains(&name.as_str()) {
                return Err(Error::Precondition(format!(
                    "unknown parameter `{name}`; expected one of {known:?}"
                )));
            }
            if names.contains(name) {
                return Err(Error::Precondition(format!(
                    "parameter `{name}` listed twice"
                )));
            }
            names.push(name.clone());
        }
        if points < names.len() + 1 {
            return Err(Error::Precondition(format!(
                "{points} data points cannot constrain {} free parameters (need at least {})",
                names.len(),
                names.len() + 1
            )));
        }
        let (mut scale, mut lo, mut hi, mut u0) = (vec![], vec![], vec![], vec![]);
        for name in &names {
            let v = base[name];
            let (l, h) = spec
                .bounds
                .get(name)
                .copied()
                .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            if !(l < h) || !(v >= l && v <= h) || !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "initial {name} = {v:e} outside bounds [{l:e}, {h:e}]"
                )));
            }
            let s = if v != 0.0 {
                v.abs()
            } else if (h - l).is_finite() {
                0.1 * (h - l)
            } else {
                natural_scale(name)
            };
            scale.push(s);
            lo.push(l / s);
            hi.push(h / s);
            u0.push(v / s);
        }
        Ok(Self {
            names,
            base,
            scale,
            lo,
            hi,
            u0,
        })
    }

    fn params(&self, u: &[f64]) -> BTreeMap<String, f64> {
        let mut p = self.base.clone();
        for ((name, &s), &v) in self.names.iter().zip(&self.scale).zip(u) {
            p.insert(name.clone(), v * s);
        }
        p
    }
}

/// Model evaluation at named parameters over a set of abscissae.
type Predictor<'a> = dyn Fn(&BTreeMap<String, f64>, &[f64]) -> Result<Vec<f64>> + 'a;

fn weighted_residuals(
    data: &MeasuredSeries,
    order: &[usize],
    predict: &Predictor<'_>,
    params: &BTreeMap<String, f64>,
) -> Result<Vec<f64>> {
    let xs: Vec<f64> = order.iter().map(|&i| data.abscissa[i]).collect();
    let model = predict(params, &xs)?;
    Ok(order
        .iter()
        .zip(&model)
        .map(|(&i, m)| (m - data.ordinate[i]) / data.sigma_at(i))
        .collect())
}

fn finish(
    data: &MeasuredSeries,
    order: &[usize],
    layout: &Layout,
    outcome: optimize::Outcome,
    predict: &Predictor<'_>,
) -> Result<FitResult> {
    let parameters = layout.params(&outcome.x);
    let sorted = weighted_residuals(data, order, predict, &parameters)?;
    let mut residuals = vec![0.0; sorted.len()];
    for (&i, r) in order.iter().zip(&sorted) {
        residuals[i] = *r;
    }
    let cost: f64 = sorted.iter().map(|r| r * r).sum();
    let n = layout.names.len();
    let (mut covariance, mut degenerate) = (None, false);
    if outcome.converged && n > 0 {
        let mut eval = |u: &[f64]| weighted_residuals(data, order, predict, &layout.params(u)).ok();
        match optimize::jacobian(&mut eval, &outcome.x, &sorted, &layout.lo, &layout.hi, 1e-6) {
            Some(j) => {
                let a = j.transpose() * &j;
                let sv = a.clone().singular_values();
                let (max, min) = (sv.max(), sv.min());
                if !(min > 1e-12 * max) {
                    degenerate = true;
                    log::warn!(
                        "fit is degenerate: normal matrix singular values span [{min:e}, {max:e}]"
                    );
                } else if let Some(inv) = a.try_inverse() {
                    let dof = data.len().saturating_sub(n).max(1);
                    let s2 = cost / dof as f64;
                    // Back to physical units
                    let d =
                        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(layout.scale.clone()));
                    covariance = Some(&d * inv * &d * s2);
                } else {
                    degenerate = true;
                }
            }
            None => degenerate = true,
        }
    } else if outcome.converged {
        covariance = Some(DMatrix::zeros(0, 0));
    }
    if !outcome.converged {
        log::warn!(
            "fit stopped after {} iterations without converging",
            outcome.iterations
        );
    }
    Ok(FitResult {
        parameters,
        free: layout.names.clone(),
        residual_norm: cost.sqrt(),
        residuals,
        covariance,
        degenerate,
        converged: outcome.converged,
        iterations: outcome.iterations,
        residual_history: outcome.history,
    })
}

fn options(spec: &FitSpec) -> Options {
    Options {
        max_iterations: spec
            .max_iterations
            .unwrap_or(Options::default().max_iterations),
        ..Options::default()
    }
}

/// Fits any subset of [`FrequencyModel::PARAMETERS`] to a frequency curve.
pub fn fit_frequency_curve(
    data: &MeasuredSeries,
    model: &FrequencyModel,
    spec: &FitSpec,
) -> Result<FitResult> {
    if data.kind != SeriesKind::FrequencyVsDistance {
        return Err(domain(
            "fit_frequency_curve needs a frequency_vs_distance series",
        ));
    }
    let scale = |_: &str| 10e-9;
    let layout = Layout::new(
        spec,
        &FrequencyModel::PARAMETERS,
        model.defaults(),
        &scale,
        data.len(),
    )?;
    let order = data.canonical_order();
    let predict = |p: &BTreeMap<String, f64>, x: &[f64]| model.predict(p, x);
    // Fails early with the model diagnostic if the start point is unusable
    weighted_residuals(data, &order, &predict, &layout.params(&layout.u0))?;
    let cost = |u: &[f64]| match weighted_residuals(data, &order, &predict, &layout.params(u)) {
        Ok(r) => r.iter().map(|v| v * v).sum(),
        Err(_) => f64::INFINITY,
    };
    let outcome = optimize::nelder_mead(cost, &layout.u0, &layout.lo, &layout.hi, options(spec));
    finish(data, &order, &layout, outcome, &predict)
}

/// Fits any subset of [`PdTraceModel::PARAMETERS`] to a photodetector trace.
/// Proposals with `β₋ ≥ β₊` are rejected by the model.
pub fn fit_pd_trace(
    data: &MeasuredSeries,
    model: &PdTraceModel,
    spec: &FitSpec,
) -> Result<FitResult> {
    if data.kind != SeriesKind::PdTrace {
        return Err(domain("fit_pd_trace needs a pd_trace series"));
    }
    let scale = |name: &str| match name {
        "x_r" => 0.1 * model.cavity.wavelength,
        "pd_offset" => model.pd_gain.abs().max(f64::MIN_POSITIVE),
        _ => 1.0,
    };
    let layout = Layout::new(
        spec,
        &PdTraceModel::PARAMETERS,
        model.defaults(),
        &scale,
        data.len(),
    )?;
    let order = data.canonical_order();
    let predict = |p: &BTreeMap<String, f64>, x: &[f64]| model.predict(p, x);
    weighted_residuals(data, &order, &predict, &layout.params(&layout.u0))?;
    let residuals = |u: &[f64]| weighted_residuals(data, &order, &predict, &layout.params(u)).ok();
    let outcome =
        optimize::levenberg_marquardt(residuals, &layout.u0, &layout.lo, &layout.hi, options(spec))
            .ok_or_else(|| domain("pd trace model failed at the initial parameters"))?;
    finish(data, &order, &layout, outcome, &predict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_model() -> PdTraceModel {
        PdTraceModel::new(CavityModel::reference())
    }

    fn synthetic_trace(model: &PdTraceModel, n: usize) -> MeasuredSeries {
        let lambda = model.cavity.wavelength;
        let v: Vec<f64> = (0..n)
            .map(|i| -0.3 * lambda + 1.1 * lambda * i as f64 / (n - 1) as f64)
            .collect();
        let y = model.predict(&model.defaults(), &v).unwrap();
        MeasuredSeries::new(SeriesKind::PdTrace, v, y, None).unwrap()
    }

    #[test]
    fn series_validation() {
        let k = SeriesKind::PdTrace;
        assert!(MeasuredSeries::new(k, vec![1.0], vec![1.0, 2.0], None).is_err());
        assert!(MeasuredSeries::new(k, vec![], vec![], None).is_err());
        assert!(MeasuredSeries::new(k, vec![f64::NAN], vec![1.0], None).is_err());
        assert!(MeasuredSeries::new(k, vec![1.0], vec![1.0], Some(vec![0.0])).is_err());
        assert!(MeasuredSeries::new(k, vec![1.0], vec![1.0], Some(vec![0.1])).is_ok());
    }

    #[test]
    fn csv_by_column_name() {
        let text = "pd_v, sigma ,piezo_v\n0.5,0.1,1e-7\n0.7,0.2,2e-7\n";
        let s = MeasuredSeries::from_csv(SeriesKind::PdTrace, text.as_bytes()).unwrap();
        assert_eq!(s.abscissa, vec![1e-7, 2e-7]);
        assert_eq!(s.ordinate, vec![0.5, 0.7]);
        assert_eq!(s.sigma, Some(vec![0.1, 0.2]));
        let err =
            MeasuredSeries::from_csv(SeriesKind::FrequencyVsDistance, text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("d_m") && err.to_string().contains("omega_ratio"));
        assert!(
            MeasuredSeries::from_csv(SeriesKind::PdTrace, "piezo_v,pd_v\n1,x\n".as_bytes())
                .is_err()
        );
    }

    #[test]
    fn gain_only_fit_is_exact() {
        let m = trace_model();
        let truth = PdTraceModel {
            pd_gain: 2.5,
            pd_offset: 0.1,
            ..m.clone()
        };
        let data = synthetic_trace(&truth, 120);
        let fit = fit_pd_trace(
            &data,
            &m,
            &FitSpec::new(&["pd_gain", "pd_offset"]).initial("pd_offset", 0.3),
        )
        .unwrap();
        assert!(fit.converged);
        assert!((fit.parameters["pd_gain"] - 2.5).abs() < 1e-10);
        assert!((fit.parameters["pd_offset"] - 0.1).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-10);
        assert!(fit.covariance.is_some() && !fit.degenerate);
    }

    #[test]
    fn zero_free_parameters_reports_misfit() {
        let m = trace_model();
        let data = synthetic_trace(
            &PdTraceModel {
                pd_offset: 0.01,
                ..m.clone()
            },
            40,
        );
        let fit = fit_pd_trace(&data, &m, &FitSpec::new::<&str>(&[])).unwrap();
        let direct = (0.01f64 * 0.01 * 40.0).sqrt();
        assert!((fit.residual_norm - direct).abs() < 1e-14);
        assert_eq!(fit.covariance.map(|c| c.len()), Some(0));
    }

    #[test]
    fn preconditions() {
        let m = trace_model();
        let data = synthetic_trace(&m, 3);
        let spec = FitSpec::new(&["beta_plus", "beta_minus", "x_r"]);
        assert!(matches!(
            fit_pd_trace(&data, &m, &spec),
            Err(Error::Precondition(_))
        ));
        let data = synthetic_trace(&m, 30);
        assert!(fit_pd_trace(&data, &m, &FitSpec::new(&["q_t"])).is_err());
        assert!(fit_pd_trace(
            &data,
            &m,
            &FitSpec::new(&["pd_gain"]).bounds("pd_gain", 2.0, 3.0)
        )
        .is_err());
        let wrong = MeasuredSeries {
            kind: SeriesKind::FrequencyVsDistance,
            ..data
        };
        assert!(fit_pd_trace(&wrong, &m, &FitSpec::new(&["pd_gain"])).is_err());
    }
}
