//! Brute-force oracles. Nothing here calls into the adaptive quadrature.

/// The kernel exactly as printed: ζ factors in their original fractional form.
pub fn printed_kernel(p: f64, x: f64, d: f64, y: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let r = (1.0 + (d / x).powi(2)).sqrt();
    let zs1 = (1.0 + r) / (1.0 - r);
    let v2 = (p * d / x).powi(2);
    let zp1 = (1.0 + v2 + r) / (1.0 + v2 - r);
    let s = (p * p + y).sqrt();
    let zs2 = (p + s) / (p - s);
    let zp2 = ((1.0 + y) * p + s) / ((1.0 + y) * p - s);
    let e = x.exp();
    x.powi(3) / (3.0 * p * p * y) * (1.0 / (zs1 * zs2 * e - 1.0) + 1.0 / (zp1 * zp2 * e - 1.0))
}

/// p²·kernel as p → ∞: only the p-polarised term survives, with
/// ζp1 → 1 and ζp2 → (2+y)/y.
pub fn printed_kernel_p_limit(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.powi(3) / (3.0 * ((2.0 + y) * x.exp() - y))
}

/// Composite trapezoid over t = 1/p ∈ [0, 1] and x ∈ [0, x_max] on an
/// (n_t+1)×(n_x+1) grid.
pub fn trapezoid_il(d: f64, y: f64, n_t: usize, n_x: usize, x_max: f64) -> f64 {
    let ht = 1.0 / n_t as f64;
    let hx = x_max / n_x as f64;
    let mut total = 0.0;
    for i in 0..=n_t {
        let t = i as f64 * ht;
        let wt = if i == 0 || i == n_t { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for j in 0..=n_x {
            let x = j as f64 * hx;
            let wx = if j == 0 || j == n_x { 0.5 } else { 1.0 };
            let f = if i == 0 {
                printed_kernel_p_limit(x, y)
            } else {
                printed_kernel(1.0 / t, x, d, y) / (t * t)
            };
            row += wx * f;
        }
        total += wt * row * hx;
    }
    total * ht
}

/// Dense-grid oracle for I_L: trapezoid grids at n and 2n with one
/// Richardson step, on xi ∈ [0, 2·60] (doubled cutoff).
pub fn brute_force_il(d: f64, y: f64, n: usize) -> f64 {
    let coarse = trapezoid_il(d, y, n, n, 120.0);
    let fine = trapezoid_il(d, y, 2 * n, 2 * n, 120.0);
    (4.0 * fine - coarse) / 3.0
}
