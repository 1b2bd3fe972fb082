//! Locally optimal block preconditioned conjugate gradient for the lowest
//! eigenpairs of a Hermitian operator.
//!
//! Each iteration performs Rayleigh–Ritz on `span[X, W, P]` where `X` holds the
//! current Ritz vectors, `W` the preconditioned residuals and `P` the previous
//! search directions. Leading converged pairs are hard-locked: they are removed
//! from the active block and every later search direction is projected against
//! them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{dense_eigenpairs, sorted_eigen};
use super::{residual_norm, EigenResult, HermitianOperator, SolverOptions, SolverPath};
use crate::error::{Error, Result};

type Col = Vec<Complex64>;

fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalize `cand` against `fixed` (assumed orthonormal) and each other,
/// dropping columns that become numerically dependent.
fn orthonormalize_against(fixed: &[&Col], cand: Vec<Col>) -> Vec<Col> {
    let mut accepted: Vec<Col> = Vec::with_capacity(cand.len());
    for mut v in cand {
        let start = norm(&v);
        if start == 0.0 || !start.is_finite() {
            continue;
        }
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in fixed.iter().copied().chain(accepted.iter()) {
                let c = dot(q, &v);
                v.iter_mut().zip(q.iter()).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nv = norm(&v);
        if nv > 1e-10 * start {
            v.iter_mut().for_each(|z| *z /= nv);
            accepted.push(v);
        }
    }
    accepted
}

fn apply_all<O: HermitianOperator + ?Sized>(op: &O, cols: &[Col]) -> Vec<Col> {
    cols.iter()
        .map(|x| {
            let mut y = vec![Complex64::default(); x.len()];
            op.apply_into(x, &mut y);
            y
        })
        .collect()
}

/// Rayleigh–Ritz on an orthonormal basis `s` with images `as_`; returns the
/// lowest `k` Ritz values and coefficient matrix.
fn rayleigh_ritz(s: &[Col], as_: &[Col], k: usize) -> (Vec<f64>, DMatrix<Complex64>) {
    let dim = s.len();
    let mut g = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = dot(&s[i], &as_[j]);
            g[(i, j)] = v;
        }
    }
    for i in 0..dim {
        g[(i, i)].im = 0.0;
        for j in i + 1..dim {
            // average the two computed halves for a Hermitian Gram matrix
            let lower = dot(&s[j], &as_[i]);
            let avg = (g[(i, j)] + lower.conj()) * 0.5;
            g[(i, j)] = avg;
            g[(j, i)] = avg.conj();
        }
    }
    let (vals, vecs) = sorted_eigen(&g);
    let k = k.min(dim);
    (vals[..k].to_vec(), vecs.columns(0, k).into_owned())
}

fn combine(cols: &[Col], coeffs: &DMatrix<Complex64>, rows: std::ops::Range<usize>) -> Vec<Col> {
    let n = cols.first().map_or(0, |c| c.len());
    (0..coeffs.ncols())
        .map(|j| {
            let mut out = vec![Complex64::default(); n];
            for (r, col) in rows.clone().zip(&cols[rows.clone()]) {
                let c = coeffs[(r, j)];
                if c != Complex64::default() {
                    out.iter_mut().zip(col).for_each(|(o, x)| *o += c * x);
                }
            }
            out
        })
        .collect()
}

/// LOBPCG for the `m` lowest eigenpairs.
///
/// Problems too small for a meaningful block (`3·block ≥ n`) are handed to the
/// dense path; the result then reports [`SolverPath::Dense`].
pub fn lobpcg<O: HermitianOperator + ?Sized>(op: &O, m: usize, opts: &SolverOptions) -> Result<EigenResult> {
    opts.validate()?;
    let n = op.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenpairs of a {n}-dimensional operator")));
    }
    let block = (m + (m / 4).max(2)).min(n);
    if 3 * block >= n && n <= opts.dense_cap {
        return dense_eigenpairs(op, m, opts.dense_cap);
    }

    let diag = op.preconditioner_diagonal();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Col> = (0..block)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    let x0 = orthonormalize_against(&[], start);
    let ax0 = apply_all(op, &x0);
    let (mut theta, c) = rayleigh_ritz(&x0, &ax0, block);
    let mut x = combine(&x0, &c, 0..x0.len());
    let mut ax = apply_all(op, &x);
    let mut p: Vec<Col> = Vec::new();
    let mut locked: Vec<(f64, Col)> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();

    for iter in 1..=opts.max_iter {
        let r: Vec<Col> = x
            .iter()
            .zip(&ax)
            .zip(&theta)
            .map(|((xj, axj), &t)| axj.iter().zip(xj).map(|(a, b)| a - b * t).collect())
            .collect();
        residuals = r.iter().map(|rj| norm(rj)).collect();

        let mut nlock = 0;
        while nlock < x.len() && residuals[nlock] <= opts.tol && locked.len() + nlock < m {
            nlock += 1;
        }
        if nlock > 0 {
            for j in 0..nlock {
                locked.push((theta[j], x[j].clone()));
            }
            x.drain(..nlock);
            ax.drain(..nlock);
            theta.drain(..nlock);
            residuals.drain(..nlock);
            p.drain(..nlock.min(p.len()));
        }
        if locked.len() >= m {
            return Ok(finish(op, locked, m, iter));
        }
        let r = &r[nlock..];

        let wanted = (m - locked.len()).min(theta.len());
        let mean = theta[..wanted].iter().sum::<f64>() / wanted as f64;
        let sigma = mean.max(1.0);
        let w: Vec<Col> = r
            .iter()
            .map(|rj| rj.iter().zip(&diag).map(|(z, d)| z / (d + sigma)).collect())
            .collect();

        let fixed: Vec<&Col> = locked.iter().map(|(_, v)| v).chain(x.iter()).collect();
        let mut extra = orthonormalize_against(&fixed, w);
        let fixed: Vec<&Col> = locked.iter().map(|(_, v)| v).chain(x.iter()).chain(extra.iter()).collect();
        let p_orth = orthonormalize_against(&fixed, std::mem::take(&mut p));
        extra.extend(p_orth);
        if extra.is_empty() {
            // the active block spans an invariant subspace; nothing left to improve
            break;
        }
        let a_extra = apply_all(op, &extra);

        let nx = x.len();
        let mut s = std::mem::take(&mut x);
        s.extend(extra);
        let mut as_ = std::mem::take(&mut ax);
        as_.extend(a_extra);

        let (new_theta, c) = rayleigh_ritz(&s, &as_, nx);
        x = combine(&s, &c, 0..s.len());
        ax = apply_all(op, &x);
        p = combine(&s, &c, nx..s.len());
        theta = new_theta;
    }

    // final check after the last update
    let mut all: Vec<(f64, Col)> = locked;
    for (t, v) in theta.iter().zip(x) {
        all.push((*t, v));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let res: Vec<f64> = all.iter().take(m).map(|(t, v)| residual_norm(op, v, *t)).collect();
    if res.iter().all(|&r| r <= opts.tol) && all.len() >= m {
        return Ok(finish(op, all, m, opts.max_iter));
    }
    let worst = res.iter().copied().fold(0.0f64, f64::max).max(residuals.iter().copied().fold(0.0, f64::max));
    Err(Error::NotConverged { iterations: opts.max_iter, worst, residuals: res })
}

fn finish<O: HermitianOperator + ?Sized>(op: &O, mut pairs: Vec<(f64, Col)>, m: usize, iterations: usize) -> EigenResult {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(m);
    let residual_norms = pairs.iter().map(|(t, v)| residual_norm(op, v, *t)).collect();
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    EigenResult {
        eigenvalues,
        eigenvectors,
        residual_norms,
        iterations,
        path: SolverPath::Iterative,
    }
}
