//! Bounded local minimizers used by the calibration fits.
//!
//! Both work in caller-normalized coordinates (parameters of order one).
//! A model evaluation that fails is treated as an infinitely bad point and
//! never accepted.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_iterations: usize,
    /// Simplex size / step length below which the search stops.
    pub x_tolerance: f64,
    /// Absolute spread in cost below which the search stops.
    pub f_tolerance: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tolerance: 1e-10,
            f_tolerance: 1e-28,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best cost after every iteration; non-increasing.
    pub history: Vec<f64>,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// Nelder–Mead simplex with projection onto the box `[lo, hi]`.
pub fn nelder_mead<F>(mut cost: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: Options) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let c = cost(x);
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    };
    let f0 = eval(x0);
    if n == 0 {
        return Outcome {
            x: vec![],
            cost: f0,
            iterations: 0,
            converged: true,
            history: vec![f0],
        };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for k in 0..n {
        let mut x = x0.to_vec();
        let step = 0.1 * x0[k].abs().max(1.0);
        x[k] = if x[k] + step <= hi[k] {
            x[k] + step
        } else {
            x[k] - step
        };
        clamp(&mut x, lo, hi);
        let f = eval(&x);
        simplex.push((x, f));
    }
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if size <= opts.x_tolerance || spread <= opts.f_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut x, lo, hi);
            x
        };
        let xr = toward(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = toward(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = toward(0.5);
            let f = eval(&x);
            (x, f)
        } else {
            let x = toward(-0.5);
            let f = eval(&x);
            (x, f)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex
        let best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&v.0)
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            let f = eval(&x);
            *v = (x, f);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, cost) = simplex.swap_remove(0);
    Outcome {
        x,
        cost,
        iterations,
        converged,
        history,
    }
}

/// Central-difference Jacobian of `residuals` at `x`, one-sided at the
/// bounds or where the model fails on one side.
pub fn jacobian<F>(
    residuals: &mut F,
    x: &[f64],
    r: &[f64],
    lo: &[f64],
    hi: &[f64],
    h: f64,
) -> Option<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let (m, n) = (r.len(), x.len());
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let step = h * x[k].abs().max(1.0);
        let shifted = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s;
            (y[k] >= lo[k] && y[k] <= hi[k]).then_some(y)
        };
        let plus = shifted(step).and_then(|y| residuals(&y));
        let minus = shifted(-step).and_then(|y| residuals(&y));
        let column: Vec<f64> = match (plus, minus) {
            (Some(p), Some(q)) => p
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect(),
            (Some(p), None) => p.iter().zip(r).map(|(a, b)| (a - b) / step).collect(),
            (None, Some(q)) => r.iter().zip(&q).map(|(a, b)| (a - b) / step).collect(),
            (None, None) => return None,
        };
        j.set_column(k, &DVector::from_vec(column));
    }
    Some(j)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Levenberg–Marquardt on `Σ r²` with a finite-difference Jacobian and
/// Marquardt diagonal scaling; steps are projected onto `[lo, hi]`.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: Options,
) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x)?;
    let mut cost = sum_sq(&r);
    let mut history = vec![cost];
    if n == 0 {
        return Some(Outcome {
            x,
            cost,
            iterations: 0,
            converged: true,
            history,
        });
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= opts.f_tolerance {
            converged = true;
            break;
        }
        let Some(j) = jacobian(&mut residuals, &x, &r, lo, hi, 1e-7) else {
            break;
        };
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() <= 1e-30 {
            converged = true;
            break;
        }
        loop {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-30);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, lo, hi);
            let moved = trial
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let accepted = residuals(&trial)
                .map(|rt| (sum_sq(&rt), rt))
                .filter(|(c, _)| *c <= cost);
            match accepted {
                Some((c, rt)) => {
                    let relative_gain = (cost - c) / cost.max(f64::MIN_POSITIVE);
                    x = trial;
                    r = rt;
                    cost = c;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-15);
                    if moved <= opts.x_tolerance || relative_gain <= 1e-15 {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e20 || moved <= opts.x_tolerance * 1e-3 {
                        // No descent direction left at this point
                        converged = g.amax() <= 1e-12 * (1.0 + cost);
                        break 'outer;
                    }
                }
            }
        }
    }
    Some(Outcome {
        x,
        cost,
        iterations,
        converged,
        history,
    })
}
