//! Static force balance `m ω_m² x = F(d − x)`, its stability, the pull-in
//! boundary and the frequency-versus-distance sweep.
//!
//! The static force is convex and decreasing in the gap, so the residual
//! `k x − F(d − x)` is concave in `x`: it has at most two roots, the lower
//! one stable. The solver first locates the residual maximum (where the
//! force gradient equals the stiffness) and then brackets the stable root
//! between `x = 0` and that maximum.

use rayon::prelude::*;

use crate::backreaction::MechanicalMode;
use crate::error::{domain, require_positive, Error, Result};
use crate::proximity::{force_gradient, total_static_force, ForceModel};
use crate::roots::{bisect_predicate, illinois};

/// Closest approach, as a fraction of `d`, the solver allows.
const WALL_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    /// Equilibrium displacement toward the dome, m.
    pub x_f: f64,
    /// Remaining gap `d − x_f`, m.
    pub gap_f: f64,
    pub stable: bool,
    /// `1 − F′(x_f)/(m ω_m²)`.
    pub stability_margin: f64,
}

impl FixedPoint {
    /// `ω_f/ω_m = √margin`; zero when unstable.
    pub fn frequency_ratio(&self) -> f64 {
        if self.stable {
            self.stability_margin.sqrt()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySweepRecord {
    pub d: f64,
    /// NaN when no stable fixed point exists.
    pub x_f: f64,
    /// ω_f/ω_m; NaN when no stable fixed point exists.
    pub omega_ratio: f64,
    pub stable: bool,
}

fn residual(x: f64, d: f64, force: &ForceModel, k: f64) -> Result<f64> {
    Ok(k * x - total_static_force(d - x, force)?)
}

/// Runs `f` inside a root finder and surfaces the first model error.
fn guarded<F>(
    f: F,
) -> (
    impl FnMut(f64) -> f64,
    std::rc::Rc<std::cell::RefCell<Option<Error>>>,
)
where
    F: Fn(f64) -> Result<f64>,
{
    let slot = std::rc::Rc::new(std::cell::RefCell::new(None));
    let sink = slot.clone();
    let g = move |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            sink.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    (g, slot)
}

fn take_error(slot: &std::rc::Rc<std::cell::RefCell<Option<Error>>>) -> Result<()> {
    match slot.borrow_mut().take() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn fixed_point_at(x: f64, d: f64, force: &ForceModel, mode: &MechanicalMode) -> Result<FixedPoint> {
    let gap = d - x;
    let margin = 1.0 - force_gradient(gap, force)? / mode.stiffness();
    Ok(FixedPoint {
        x_f: x,
        gap_f: gap,
        stable: margin > 0.0,
        stability_margin: margin,
    })
}

/// Displacement where the force gradient reaches the stiffness `k`, i.e.
/// the maximum of the concave residual; `None` if the gradient already
/// exceeds `k` at `x = 0`.
///
/// The gap is halved from `d` until the gradient exceeds `k`, then the
/// crossing is refined in `ln(gap)`. This keeps probes away from the
/// closest-approach wall unless the crossing really lies there.
fn residual_peak(d: f64, force: &ForceModel, k: f64) -> Result<Option<f64>> {
    let excess = |gap: f64| -> Result<f64> { Ok(force_gradient(gap, force)? - k) };
    if excess(d)? >= 0.0 {
        return Ok(None);
    }
    let min_gap = d * WALL_FRACTION;
    let mut upper = d;
    let mut lower = 0.5 * d;
    loop {
        if lower <= min_gap {
            lower = min_gap;
            if excess(lower)? < 0.0 {
                return Ok(Some(d - min_gap));
            }
            break;
        }
        if excess(lower)? >= 0.0 {
            break;
        }
        upper = lower;
        lower *= 0.5;
    }
    let (g, slot) = guarded(|s: f64| excess(s.exp()));
    let root = illinois(g, lower.ln(), upper.ln());
    take_error(&slot)?;
    Ok(Some(d - root?.exp()))
}

/// Physical (stable, smallest-`x`) solution of the force balance at distance `d`.
///
/// Fails with [`Error::PullIn`] when no stable root exists.
pub fn solve_fixed_point(d: f64, force: &ForceModel, mode: &MechanicalMode) -> Result<FixedPoint> {
    require_positive("distance", d)?;
    mode.validate()?;
    let k = mode.stiffness();
    let r0 = residual(0.0, d, force, k)?;
    if r0 == 0.0 {
        return fixed_point_at(0.0, d, force, mode);
    }
    let x_peak = residual_peak(d, force, k)?.ok_or(Error::PullIn {
        d,
        max_residual: r0,
    })?;
    let r_peak = residual(x_peak, d, force, k)?;
    if r_peak < 0.0 {
        return Err(Error::PullIn {
            d,
            max_residual: r_peak,
        });
    }
    let (g, slot) = guarded(|x| residual(x, d, force, k));
    let root = illinois(g, 0.0, x_peak);
    take_error(&slot)?;
    fixed_point_at(root?, d, force, mode)
}

/// Re-solves the force balance starting from a displacement estimate.
///
/// The bracket is grown geometrically around `guess` until the residual
/// changes sign upward, so the root returned is a stable one.
pub fn solve_fixed_point_near(
    d: f64,
    guess: f64,
    force: &ForceModel,
    mode: &MechanicalMode,
) -> Result<FixedPoint> {
    require_positive("distance", d)?;
    let k = mode.stiffness();
    let wall = d * (1.0 - WALL_FRACTION);
    if !(guess >= 0.0 && guess < wall) {
        return Err(domain(format!(
            "initial guess {guess:e} outside [0, {wall:e})"
        )));
    }
    let r = |x: f64| residual(x, d, force, k);
    let r_guess = r(guess)?;
    if r_guess == 0.0 {
        return fixed_point_at(guess, d, force, mode);
    }
    let mut step = (guess.abs() * 1e-12).max(d * 1e-15);
    let (mut lo, mut hi) = (guess, guess);
    loop {
        if r_guess < 0.0 {
            hi = (hi + step).min(wall);
            if r(hi)? >= 0.0 {
                break;
            }
            if hi >= wall {
                return Err(Error::PullIn {
                    d,
                    max_residual: r(hi)?,
                });
            }
        } else {
            lo = (lo - step).max(0.0);
            if r(lo)? <= 0.0 {
                break;
            }
            if lo <= 0.0 {
                return Err(domain(format!(
                    "no stable fixed point below guess {guess:e}"
                )));
            }
        }
        step *= 2.0;
    }
    let (g, slot) = guarded(r);
    let root = illinois(g, lo, hi);
    take_error(&slot)?;
    let fp = fixed_point_at(root?, d, force, mode)?;
    if !fp.stable {
        return Err(Error::PullIn {
            d,
            max_residual: 0.0,
        });
    }
    Ok(fp)
}

/// Solves each distance independently (in parallel, results in grid order).
pub fn frequency_vs_distance(
    d_grid: &[f64],
    force: &ForceModel,
    mode: &MechanicalMode,
) -> Result<Vec<FrequencySweepRecord>> {
    if d_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(domain("distance grid must be positive"));
    }
    if d_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("distance grid must be strictly increasing"));
    }
    d_grid
        .par_iter()
        .map(|&d| match solve_fixed_point(d, force, mode) {
            Ok(fp) => Ok(FrequencySweepRecord {
                d,
                x_f: fp.x_f,
                omega_ratio: fp.frequency_ratio(),
                stable: fp.stable,
            }),
            Err(Error::PullIn { .. }) => Ok(FrequencySweepRecord {
                d,
                x_f: f64::NAN,
                omega_ratio: f64::NAN,
                stable: false,
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Distance below which no stable equilibrium exists, bisected to 1 pm.
///
/// `bracket.0` must be in the pull-in regime and `bracket.1` stable.
pub fn pull_in_distance(
    force: &ForceModel,
    mode: &MechanicalMode,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = bracket;
    require_positive("bracket lower end", lo)?;
    if !(hi > lo) {
        return Err(domain("pull-in bracket must be increasing"));
    }
    let mut failure = None;
    let stable = |d: f64| -> bool {
        match solve_fixed_point(d, force, mode) {
            Ok(fp) => fp.stable,
            Err(Error::PullIn { .. }) => false,
            Err(e) => {
                failure.get_or_insert(e);
                false
            }
        }
    };
    let result = bisect_predicate(stable, lo, hi, 1e-12);
    if let Some(e) = failure {
        return Err(e);
    }
    let (a, b) = result?;
    Ok(0.5 * (a + b))
}

/// Distance at which the stable branch reaches `ω_f/ω_m = target`.
///
/// Both ends of `bracket` must have stable equilibria, with the ratio
/// below `target` at the lower end and above it at the upper end.
pub fn distance_at_frequency_ratio(
    target: f64,
    force: &ForceModel,
    mode: &MechanicalMode,
    bracket: (f64, f64),
) -> Result<f64> {
    let f = |d: f64| -> Result<f64> {
        Ok(solve_fixed_point(d, force, mode)?.frequency_ratio() - target)
    };
    let (g, slot) = guarded(f);
    let root = illinois(g, bracket.0, bracket.1);
    take_error(&slot)?;
    root
}
