//! Gauss-Legendre rules and the small tensor-product helpers built on them.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the three-term recurrence; accurate to a few ulps for
/// the orders used here (≤ 64).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

/// Calls `f(index)` for every multi-index of a tensor with the given extents,
/// last axis fastest.
pub(crate) fn for_each_index(extents: &[usize], mut f: impl FnMut(&[usize])) {
    if extents.iter().any(|&e| e == 0) {
        return;
    }
    let mut idx = vec![0usize; extents.len()];
    loop {
        f(&idx);
        let mut axis = extents.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < extents[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// ∫ over [-1,1]^d of (1 + |z|²)^(-b/2), by tensor Gauss-Legendre.
///
/// Smooth integrand; 24 points per axis give close to machine precision for
/// the exponents that occur (b ≤ 12, d ≤ 2).
pub(crate) fn bracket_integral(d: usize, b: f64) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let (x, w) = gauss_legendre(24);
    let mut total = 0.0;
    for_each_index(&vec![x.len(); d], |idx| {
        let mut r2 = 0.0;
        let mut wt = 1.0;
        for &i in idx {
            r2 += x[i] * x[i];
            wt *= w[i];
        }
        total += wt * (1.0 + r2).powf(-0.5 * b);
    });
    total
}

/// ∫ over the cube [-1,1]^n of |z|^(-a), for a < n.
pub fn cube_singular_integral(n: usize, a: f64) -> f64 {
    assert!(a < n as f64, "cube integral diverges for a >= n");
    2.0 * n as f64 / (n as f64 - a) * bracket_integral(n - 1, a)
}

/// ∫ over the complement of [-1,1]^n of |z|^(-b), for b > n.
pub fn cube_exterior_integral(n: usize, b: f64) -> f64 {
    assert!(b > n as f64, "exterior integral diverges for b <= n");
    2.0 * n as f64 / (b - n as f64) * bracket_integral(n - 1, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        for deg in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33, 64] {
            let (_, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_cube_integral_in_one_and_two_dimensions() {
        // 1-D: ∫_{-1}^{1} |z|^{-1/2} = 4
        assert!((cube_singular_integral(1, 0.5) - 4.0).abs() < 1e-14);
        // 2-D, a = 1: 8 asinh(1)
        let exact = 8.0 * 1f64.asinh();
        assert!((cube_singular_integral(2, 1.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn exterior_integral_matches_polar_bound() {
        // 1-D: 2∫_1^∞ z^{-3} = 1
        assert!((cube_exterior_integral(1, 3.0) - 1.0).abs() < 1e-14);
        // 2-D exterior of the square lies between the exterior of the
        // circumscribed and the inscribed disk.
        let b = 3.0;
        let v = cube_exterior_integral(2, b);
        let disk = |r: f64| 2.0 * PI * r.powf(2.0 - b) / (b - 2.0);
        assert!(v < disk(1.0) && v > disk(2f64.sqrt()));
    }
}
