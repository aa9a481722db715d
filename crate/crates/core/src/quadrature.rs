//! One-dimensional adaptive Gauss–Kronrod quadrature.
//!
//! Global adaptive bisection driven by the 21-point Kronrod extension of the
//! 10-point Gauss rule, with the QUADPACK error heuristic. The nested double
//! integral of the Lifshitz kernel and the Derjaguin force integral are both
//! built on [`integrate`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Abscissae of the 21-point Kronrod rule; odd indices are the 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    pub max_subdivisions: usize,
}

/// Value and estimated absolute error of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Applies the 21-point Kronrod rule on `[a, b]`; returns (value, error).
pub fn gauss_kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = f_center.abs() * WGK[10];
    let mut values = [(0.0, 0.0); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        *slot = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for (j, (lo, hi)) in values.iter().enumerate() {
        asc += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, error)
}

/// Fixed 10-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre10<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for k in 0..5 {
        let dx = half * XGK[2 * k + 1];
        sum += WG[k] * (f(center - dx) + f(center + dx));
    }
    sum * half
}

/// Integrates `f` over the finite interval `[a, b]` to the requested tolerance.
///
/// Fails with [`Error::ToleranceNotReached`] carrying the best estimate when
/// the subdivision budget runs out, and with a domain error when the
/// integrand produces a non-finite value.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let (value, error) = gauss_kronrod21(&mut f, a, b);
    check_finite(value, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_error = error;
    let mut subdivisions = 0;
    loop {
        let target = tol.absolute.max(tol.relative * total.abs());
        if total_error <= target {
            break;
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::ToleranceNotReached {
                estimate: total,
                error: total_error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval no longer splittable in floating point.
            return Err(Error::ToleranceNotReached {
                estimate: total,
                error: total_error,
                subdivisions,
            });
        }
        let (v1, e1) = gauss_kronrod21(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod21(&mut f, mid, worst.b);
        check_finite(v1 + v2, worst.a, worst.b)?;
        total += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let mut segments = heap.into_vec();
    segments.sort_by(|s, t| s.a.total_cmp(&t.a));
    let value = segments.iter().map(|s| s.value).sum();
    let error = segments.iter().map(|s| s.error).sum();
    Ok(Estimate {
        value,
        error,
        subdivisions,
    })
}

fn check_finite(value: f64, a: f64, b: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "integrand not finite on [{a:e}, {b:e}]"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance {
        relative: 1e-12,
        absolute: 0.0,
        max_subdivisions: 200,
    };

    #[test]
    fn polynomials_are_exact() {
        let est = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, TOL).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((est.value - exact).abs() < 1e-13);
        let gl = gauss_legendre10(&mut |x: f64| x.powi(19), 0.0, 1.0);
        assert!((gl - 0.05).abs() < 1e-15);
    }

    #[test]
    fn peaked_integrand_converges() {
        // ∫₀¹ 1/(1e-4 + x²) dx = 100·atan(100)
        let est = integrate(|x| 1.0 / (1e-4 + x * x), 0.0, 1.0, TOL).unwrap();
        let exact = 100.0 * 100f64.atan();
        assert!((est.value - exact).abs() / exact < 1e-11);
        assert!(est.error < 1e-9 * exact);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let tol = Tolerance {
            relative: 1e-14,
            absolute: 0.0,
            max_subdivisions: 2,
        };
        let err = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, tol).unwrap_err();
        match err {
            Error::ToleranceNotReached {
                estimate,
                error,
                subdivisions,
            } => {
                assert_eq!(subdivisions, 2);
                assert!((estimate - 2.0).abs() < 0.2);
                assert!(error > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_integrand_is_rejected() {
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, TOL),
            Err(Error::Domain(_))
        ));
    }
}
