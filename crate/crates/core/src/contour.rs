//! Zero contours of a scalar field sampled on a rectilinear grid
//! (marching squares with linear interpolation along cell edges).

use std::collections::BTreeMap;

/// Grid edge: `(vertical, i, j)`. Horizontal edges join `(i, j)`–`(i+1, j)`,
/// vertical ones `(i, j)`–`(i, j+1)`.
type EdgeKey = (bool, usize, usize);

fn crossing(xs: &[f64], ys: &[f64], field: &[Vec<f64>], e: EdgeKey) -> (f64, f64) {
    let (vertical, i, j) = e;
    let (i2, j2) = if vertical { (i, j + 1) } else { (i + 1, j) };
    let (a, b) = (field[j][i], field[j2][i2]);
    let t = a / (a - b);
    (xs[i] + t * (xs[i2] - xs[i]), ys[j] + t * (ys[j2] - ys[j]))
}

/// Polylines along which `field` changes sign. `field[j][i]` is the value
/// at `(xs[i], ys[j])`; cells touching a NaN are skipped.
///
/// Open polylines end on the grid boundary or next to skipped cells;
/// closed ones repeat their first point at the end.
pub fn zero_contours(xs: &[f64], ys: &[f64], field: &[Vec<f64>]) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (xs.len(), ys.len());
    assert!(
        field.len() == ny && field.iter().all(|r| r.len() == nx),
        "field shape must match the axes"
    );
    let neg = |i: usize, j: usize| field[j][i] < 0.0;

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let corners = [
                field[j][i],
                field[j][i + 1],
                field[j + 1][i + 1],
                field[j + 1][i],
            ];
            if corners.iter().any(|v| v.is_nan()) {
                continue;
            }
            let bottom = (false, i, j);
            let right = (true, i + 1, j);
            let top = (false, i, j + 1);
            let left = (true, i, j);
            let (a, b, c, d) = (neg(i, j), neg(i + 1, j), neg(i + 1, j + 1), neg(i, j + 1));
            let mut crossed = Vec::with_capacity(4);
            if a != b {
                crossed.push(bottom);
            }
            if b != c {
                crossed.push(right);
            }
            if c != d {
                crossed.push(top);
            }
            if d != a {
                crossed.push(left);
            }
            match crossed.len() {
                2 => segments.push((crossed[0], crossed[1])),
                4 => {
                    // Saddle: the cell centre decides which diagonal is connected
                    let centre_neg = corners.iter().sum::<f64>() < 0.0;
                    if centre_neg == a {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((bottom, left));
                        segments.push((right, top));
                    }
                }
                _ => {}
            }
        }
    }

    let mut adjacency: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (s, &(e1, e2)) in segments.iter().enumerate() {
        adjacency.entry(e1).or_default().push(s);
        adjacency.entry(e2).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let trace = |start: EdgeKey, used: &mut Vec<bool>| -> Option<Vec<(f64, f64)>> {
        let mut at = start;
        let mut keys = vec![start];
        while let Some(&s) = adjacency[&at].iter().find(|&&s| !used[s]) {
            used[s] = true;
            let (e1, e2) = segments[s];
            at = if e1 == at { e2 } else { e1 };
            keys.push(at);
        }
        (keys.len() > 1).then(|| keys.iter().map(|&k| crossing(xs, ys, field, k)).collect())
    };

    // Boundary-terminated chains first, so they are not split into pieces
    let ends: Vec<EdgeKey> = adjacency
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(k, _)| *k)
        .collect();
    for k in ends {
        if let Some(line) = trace(k, &mut used) {
            lines.push(line);
        }
    }
    let keys: Vec<EdgeKey> = adjacency.keys().copied().collect();
    for k in keys {
        if let Some(line) = trace(k, &mut used) {
            lines.push(line);
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn sample(xs: &[f64], ys: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
        ys.iter()
            .map(|&y| xs.iter().map(|&x| f(x, y)).collect())
            .collect()
    }

    #[test]
    fn no_sign_change_no_lines() {
        let xs = axis(0.0, 1.0, 5);
        let ys = axis(0.0, 1.0, 4);
        assert!(zero_contours(&xs, &ys, &sample(&xs, &ys, |x, y| 1.0 + x + y)).is_empty());
    }

    #[test]
    fn linear_field_recovered_exactly() {
        let xs = axis(0.0, 2.0, 21);
        let ys = axis(0.0, 1.0, 11);
        let lines = zero_contours(&xs, &ys, &sample(&xs, &ys, |x, y| y - 0.3 - 0.2 * x));
        assert_eq!(lines.len(), 1);
        assert!(lines[0].len() >= 21);
        for &(x, y) in &lines[0] {
            assert!((y - 0.3 - 0.2 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_is_closed() {
        let xs = axis(-1.0, 1.0, 41);
        let ys = axis(-1.0, 1.0, 41);
        let lines = zero_contours(&xs, &ys, &sample(&xs, &ys, |x, y| x * x + y * y - 0.25));
        assert_eq!(lines.len(), 1);
        let l = &lines[0];
        assert_eq!(l.first(), l.last());
        let h = 0.05;
        for &(x, y) in l {
            assert!(((x * x + y * y).sqrt() - 0.5).abs() < h * h);
        }
    }

    #[test]
    fn nan_cells_split_lines() {
        let xs = axis(0.0, 1.0, 11);
        let ys = axis(0.0, 1.0, 11);
        let mut f = sample(&xs, &ys, |x, _| x - 0.45);
        f[5][4] = f64::NAN;
        let lines = zero_contours(&xs, &ys, &f);
        assert_eq!(lines.len(), 2);
        assert!(lines
            .iter()
            .all(|l| l.iter().all(|p| (p.0 - 0.45).abs() < 1e-12)));
    }

    #[test]
    fn saddle_resolved() {
        let xs = vec![0.0, 1.0];
        let ys = vec![0.0, 1.0];
        let f = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let lines = zero_contours(&xs, &ys, &f);
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|l| l.len() == 2));
    }
}
