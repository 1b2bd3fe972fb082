//! Symmetric tridiagonal eigenproblems with a constant off-diagonal.

use rayon::prelude::*;

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let e2 = off * off;
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - e2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin enclosure of the spectrum.
pub fn bounds(diag: &[f64], off: f64) -> (f64, f64) {
    let r = 2.0 * off.abs();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
    let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
    (lo, hi)
}

/// The `m` lowest eigenvalues by bisection on Sturm counts.
pub fn lowest_eigenvalues(diag: &[f64], off: f64, m: usize) -> Vec<f64> {
    let (lo, hi) = bounds(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    (0..m)
        .into_par_iter()
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            // invariant: count(a) ≤ j < count(b)
            while b - a > 4.0 * f64::EPSILON * scale {
                let c = 0.5 * (a + b);
                if c <= a || c >= b {
                    break;
                }
                if sturm_count(diag, off, c) > j {
                    b = c;
                } else {
                    a = c;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Eigenvector for an accurate eigenvalue `lambda` by inverse iteration,
/// normalized to unit 2-norm.
pub fn inverse_iteration(diag: &[f64], off: f64, lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let (lo, hi) = bounds(diag, off);
    let shift = lambda + 1e3 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    let lu = TridiagLu::new(diag.iter().map(|d| d - shift).collect(), off);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    for _ in 0..3 {
        x = lu.solve(&x);
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    x
}

/// LU with partial pivoting of a tridiagonal matrix with constant off-diagonal.
struct TridiagLu {
    // U has up to two superdiagonals after pivoting
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn new(mut d: Vec<f64>, off: f64) -> Self {
        let n = d.len();
        let tiny = f64::EPSILON * d.iter().fold(off.abs(), |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut du: Vec<f64> = vec![off; n.saturating_sub(1)];
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let sub = off;
            if d[i].abs() >= sub.abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = sub / d[i];
                l[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                // swap rows i and i+1
                swapped[i] = true;
                let f = d[i] / sub;
                l[i] = f;
                d[i] = sub;
                let t = du[i];
                du[i] = d[i + 1];
                d[i + 1] = t - f * d[i + 1];
                if i + 1 < n - 1 {
                    u2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        TridiagLu { u0: d, u1: du, u2, l, swapped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                y.swap(i, i + 1);
                y[i + 1] -= self.l[i] * y[i];
            } else {
                y[i + 1] -= self.l[i] * y[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}
