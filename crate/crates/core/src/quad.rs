//! Quadrature helpers on node grids.

/// Per-cell trapezoid integrals of nodal values `g` on nodes `x`.
pub fn trapezoid_cells(x: &[f64], g: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(g.windows(2))
        .map(|(xw, gw)| 0.5 * (xw[1] - xw[0]) * (gw[0] + gw[1]))
        .collect()
}

/// Trapezoid integral over the whole grid.
pub fn trapezoid(x: &[f64], g: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    trapezoid_cells(x, g).iter().sum()
}

/// Per-cell integrals from the cubic through four neighbouring nodes
/// (`h/24 * (-g[i-1] + 13 g[i] + 13 g[i+1] - g[i+2])`), falling back to the
/// one-sided quadratic rule on the two boundary cells and to the trapezoid
/// rule on grids with fewer than four nodes. Assumes uniform spacing.
pub fn cubic_cells(x: &[f64], g: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 4 {
        return trapezoid_cells(x, g);
    }
    let mut out = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let h = x[i + 1] - x[i];
        let v = if i == 0 {
            h / 12.0 * (5.0 * g[0] + 8.0 * g[1] - g[2])
        } else if i == n - 2 {
            h / 12.0 * (5.0 * g[n - 1] + 8.0 * g[n - 2] - g[n - 3])
        } else {
            h / 24.0 * (-g[i - 1] + 13.0 * g[i] + 13.0 * g[i + 1] - g[i + 2])
        };
        out.push(v);
    }
    out
}

/// Running sums: `out[k] = cells[0] + ... + cells[k-1]`, length `cells.len() + 1`.
pub fn prefix(cells: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(cells.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for c in cells {
        acc += c;
        out.push(acc);
    }
    out
}

/// Running sums from the right: `out[k] = cells[k] + ... + cells[last]`,
/// length `cells.len() + 1` with a trailing zero.
pub fn suffix(cells: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cells.len() + 1];
    for k in (0..cells.len()).rev() {
        out[k] = out[k + 1] + cells[k];
    }
    out
}

/// Smallest `q <= max_q` such that every point sits on the lattice
/// `points[0] + j * span / q` within `tol` (relative to the span).
pub fn lattice_divisions(points: &[f64], max_q: usize, tol: f64) -> Option<usize> {
    if points.len() < 2 {
        return None;
    }
    let lo = points[0];
    let span = points[points.len() - 1] - lo;
    if span <= 0.0 {
        return None;
    }
    (1..=max_q).find(|&q| {
        points.iter().all(|&p| {
            let r = (p - lo) / span * q as f64;
            (r - r.round()).abs() <= tol * q as f64
        })
    })
}

/// Uniform grid of `n` points from `lo` to `hi`, with exact endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    v[n - 1] = hi;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_rule_is_exact_for_cubics() {
        let x = linspace(-1.0, 2.0, 31);
        let g: Vec<f64> = x.iter().map(|t| t * t * t - 2.0 * t + 1.0).collect();
        let total: f64 = cubic_cells(&x, &g).iter().sum();
        // integral of t^3 - 2t + 1 on [-1, 2] = 15/4 - 3 + 3
        assert!((total - 3.75).abs() < 1e-12, "{total}");
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let x = linspace(0.0, 1.0, 11);
        let g: Vec<f64> = x.iter().map(|t| 3.0 * t + 1.0).collect();
        assert!((trapezoid(&x, &g) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn prefix_and_suffix_partition_the_total() {
        let c = [1.0, 2.0, 3.0];
        let p = prefix(&c);
        let s = suffix(&c);
        for k in 0..=3 {
            assert_eq!(p[k] + s[k], 6.0);
        }
    }

    #[test]
    fn lattice_detection() {
        assert_eq!(lattice_divisions(&[-0.9, 0.1], 100, 1e-9), Some(1));
        assert_eq!(lattice_divisions(&[-1.0, 0.0, 2.0], 100, 1e-9), Some(3));
        assert_eq!(lattice_divisions(&[0.0, 0.1, 1.0], 100, 1e-9), Some(10));
        assert_eq!(lattice_divisions(&[0.0, std::f64::consts::PI / 10.0, 1.0], 50, 1e-9), None);
    }
}
