//! Extremal eigenpairs: Sturm bisection + inverse iteration for symmetric
//! tridiagonal matrices, and a restarted Lanczos with full
//! reorthogonalization for matrix-free symmetric operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum EigError {
    #[error(
        "eigensolver did not converge: best Ritz value {best:.12e}, residual {residual:.3e} after {iterations} iterations"
    )]
    NoConvergence {
        best: f64,
        residual: f64,
        iterations: usize,
    },
}

/// Count of eigenvalues of the tridiagonal (diag, off) strictly below `x`
/// via the LDL^T recurrence.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let b = off[i - 1];
        let mut denom = d;
        if denom.abs() < f64::MIN_POSITIVE.sqrt() {
            denom = -f64::MIN_POSITIVE.sqrt();
        }
        d = diag[i] - x - b * b / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiag_smallest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    assert!(n >= 1 && off.len() + 1 == n);
    if n == 1 {
        return diag[0];
    }
    // Gershgorin bracket.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        if i > 0 {
            radius += off[i - 1].abs();
        }
        if i < n - 1 {
            radius += off[i].abs();
        }
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let scale = (hi - lo).max(1e-300);
    let (mut lo, mut hi) = (lo - 1e-12 * scale, hi + 1e-12 * scale);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * scale {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solve (T - shift) x = rhs for tridiagonal T with partial pivoting.
fn tridiag_solve_shifted(diag: &[f64], off: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Bands: dl (sub), d (main), du (super), du2 (fill-in from pivoting).
    let mut dl = vec![0.0; n];
    let mut d: Vec<f64> = diag.iter().map(|a| a - shift).collect();
    let mut du = vec![0.0; n];
    let mut du2 = vec![0.0; n];
    for i in 0..n - 1 {
        dl[i + 1] = off[i];
        du[i] = off[i];
    }
    let mut x = rhs.to_vec();
    for i in 0..n - 1 {
        if dl[i + 1].abs() > d[i].abs() {
            // Swap rows i and i+1.
            std::mem::swap(&mut d[i], &mut dl[i + 1]);
            let tmp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = 0.0;
            }
            x.swap(i, i + 1);
        }
        let mut piv = d[i];
        if piv.abs() < 1e-300 {
            piv = 1e-300_f64.copysign(if piv == 0.0 { 1.0 } else { piv });
        }
        let m = dl[i + 1] / piv;
        d[i + 1] -= m * du[i];
        if i + 2 < n {
            du[i + 1] -= m * du2[i];
        }
        x[i + 1] -= m * x[i];
    }
    // Back substitution.
    let safe = |v: f64| {
        if v.abs() < 1e-300 {
            1e-300_f64.copysign(if v == 0.0 { 1.0 } else { v })
        } else {
            v
        }
    };
    x[n - 1] /= safe(d[n - 1]);
    if n >= 2 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / safe(d[n - 2]);
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / safe(d[i]);
    }
    x
}

/// Smallest eigenpair of a symmetric tridiagonal matrix.
pub fn tridiag_smallest_eigenpair(diag: &[f64], off: &[f64]) -> (f64, Vec<f64>) {
    let n = diag.len();
    let lambda = tridiag_smallest_eigenvalue(diag, off);
    if n == 1 {
        return (lambda, vec![1.0]);
    }
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let shift = lambda - 1e-12 * scale;
    let mut v: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -0.5 })
        .collect();
    normalize(&mut v);
    for _ in 0..3 {
        v = tridiag_solve_shifted(diag, off, shift, &v);
        normalize(&mut v);
    }
    // Rayleigh quotient beats the bisection midpoint once the vector is good.
    let mut tv = vec![0.0; n];
    for i in 0..n {
        tv[i] = diag[i] * v[i];
        if i > 0 {
            tv[i] += off[i - 1] * v[i - 1];
        }
        if i < n - 1 {
            tv[i] += off[i] * v[i + 1];
        }
    }
    let rq: f64 = v.iter().zip(&tv).map(|(a, b)| a * b).sum();
    (rq, v)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Result of a Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
    /// ||A x - lambda x|| / ||x||.
    pub residual: f64,
    /// Total operator applications.
    pub iterations: usize,
}

/// Smallest eigenpair of a symmetric operator given through its matvec,
/// by restarted Lanczos with full reorthogonalization.
pub fn lanczos_smallest<F>(
    apply: F,
    dim: usize,
    tol: f64,
    krylov_dim: usize,
    max_restarts: usize,
    seed: u64,
) -> Result<LanczosResult, EigError>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert!(dim >= 1);
    if dim == 1 {
        let mut y = vec![0.0];
        apply(&[1.0], &mut y);
        return Ok(LanczosResult {
            eigenvalue: y[0],
            eigenvector: vec![1.0],
            residual: 0.0,
            iterations: 1,
        });
    }
    let m = krylov_dim.clamp(2, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut q0);
    let mut total_applies = 0usize;
    let mut best = (f64::INFINITY, f64::INFINITY); // (ritz, residual)

    for _restart in 0..max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![q0.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![0.0; dim];
        for j in 0..m {
            apply(&basis[j], &mut w);
            total_applies += 1;
            if j > 0 {
                let b = betas[j - 1];
                for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= b * qi;
                }
            }
            let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alphas.push(a);
            for (wi, qi) in w.iter_mut().zip(&basis[j]) {
                *wi -= a * qi;
            }
            // Full reorthogonalization, twice for good measure.
            for _ in 0..2 {
                for q in &basis {
                    let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if j + 1 == m || b < 1e-13 {
                break;
            }
            betas.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alphas.len();
        let (theta, y) = tridiag_smallest_eigenpair(&alphas, &betas[..k - 1]);
        let mut x = vec![0.0; dim];
        for (coef, q) in y.iter().zip(&basis) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += coef * qi;
            }
        }
        normalize(&mut x);
        let mut hx = vec![0.0; dim];
        apply(&x, &mut hx);
        total_applies += 1;
        let residual = hx
            .iter()
            .zip(&x)
            .map(|(h, xi)| (h - theta * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel_res = residual / theta.abs().max(1.0);
        if theta < best.0 || rel_res < best.1 {
            best = (theta, rel_res);
        }
        if rel_res <= tol {
            return Ok(LanczosResult {
                eigenvalue: theta,
                eigenvector: x,
                residual: rel_res,
                iterations: total_applies,
            });
        }
        q0 = x;
    }
    Err(EigError::NoConvergence {
        best: best.0,
        residual: best.1,
        iterations: total_applies,
    })
}
