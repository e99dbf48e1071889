//! Jacobi-preconditioned conjugate gradients over flat slices.
//!
//! Operators are passed as closures so the stencil kernels never have to
//! assemble a matrix. With `mean_free` set, the iteration is restricted to the
//! zero-mean subspace, which is what the pure-Neumann problems need.

use crate::error::{NschError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(a: &mut [f64]) {
    let m = a.iter().sum::<f64>() / a.len() as f64;
    a.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` for symmetric positive (semi-)definite `A`.
///
/// `x` holds the initial guess on entry. Convergence is declared when the
/// recomputed residual satisfies `|b - A x| <= tol |b|`.
pub fn pcg<F>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    mean_free: bool,
) -> Result<CgStats>
where
    F: FnMut(&[f64], &mut [f64]),
{
    debug_assert_eq!(diag.len(), b.len());
    let inv_diag: Vec<f64> = diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    pcg_with(
        apply,
        |r, z| z.iter_mut().zip(r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d),
        b,
        x,
        tol,
        max_iter,
        mean_free,
    )
}

/// Like [`pcg`] with an arbitrary symmetric positive definite preconditioner
/// `precond(r, z)` computing `z = P^-1 r`.
pub fn pcg_with<F, P>(
    mut apply: F,
    mut precond: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    mean_free: bool,
) -> Result<CgStats>
where
    F: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    debug_assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    if mean_free {
        remove_mean(x);
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual if the recurrence drifts.
    loop {
        apply(x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        if mean_free {
            remove_mean(&mut r);
        }
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok(CgStats { iterations, relative_residual: rel });
        }
        if iterations >= max_iter {
            return Err(NschError::NonConvergence { iterations, residual: rel });
        }
        if !rel.is_finite() {
            return Err(NschError::NonFinite("conjugate gradient residual"));
        }

        precond(&r, &mut z);
        if mean_free {
            remove_mean(&mut z);
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);

        while iterations < max_iter {
            iterations += 1;
            apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm2(&r) <= 0.5 * tol * bnorm {
                break;
            }
            precond(&r, &mut z);
            if mean_free {
                remove_mean(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if mean_free {
            remove_mean(x);
        }
    }
}

/// Cosine transform diagonalising the cell-centred Neumann Laplacian on an
/// `nx x ny` grid. Basis `cos(pi k (i + 1/2) / n)`, applied as dense matrices.
#[derive(Debug, Clone)]
pub struct NeumannDct {
    nx: usize,
    ny: usize,
    cx: Vec<f64>,
    cy: Vec<f64>,
    /// Eigenvalues of `-laplace` per mode, `l * nx + k` ordering.
    pub eigen: Vec<f64>,
}

fn cos_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for k in 0..n {
        for i in 0..n {
            c[k * n + i] = (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
        }
    }
    c
}

impl NeumannDct {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        let lam = |k: usize, n: usize, h: f64| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h);
        let mut eigen = vec![0.0; nx * ny];
        for l in 0..ny {
            for k in 0..nx {
                eigen[l * nx + k] = lam(k, nx, hx) + lam(l, ny, hy);
            }
        }
        NeumannDct { nx, ny, cx: cos_matrix(nx), cy: cos_matrix(ny), eigen }
    }

    /// Modal coefficients of `f`.
    pub fn forward(&self, f: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut tmp = vec![0.0; nx * ny];
        for j in 0..ny {
            let row = &f[j * nx..(j + 1) * nx];
            for k in 0..nx {
                tmp[j * nx + k] = dot(&self.cx[k * nx..(k + 1) * nx], row);
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..ny {
            for j in 0..ny {
                let c = self.cy[l * ny + j];
                let src = &tmp[j * nx..(j + 1) * nx];
                let dst = &mut out[l * nx..(l + 1) * nx];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += c * s);
            }
        }
    }

    /// Inverse of [`NeumannDct::forward`].
    pub fn inverse(&self, coef: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let wx = |k: usize| if k == 0 { 1.0 / nx as f64 } else { 2.0 / nx as f64 };
        let wy = |l: usize| if l == 0 { 1.0 / ny as f64 } else { 2.0 / ny as f64 };
        let mut tmp = vec![0.0; nx * ny];
        for j in 0..ny {
            for l in 0..ny {
                let c = wy(l) * self.cy[l * ny + j];
                let src = &coef[l * nx..(l + 1) * nx];
                let dst = &mut tmp[j * nx..(j + 1) * nx];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += c * s);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                for k in 0..nx {
                    s += wx(k) * self.cx[k * nx + i] * tmp[j * nx + k];
                }
                out[j * nx + i] = s;
            }
        }
    }

    /// Multiplies every mode by `symbol(eigenvalue of -laplace)`.
    pub fn apply_symbol(&self, f: &[f64], out: &mut [f64], symbol: impl Fn(f64) -> f64) {
        let mut coef = vec![0.0; f.len()];
        self.forward(f, &mut coef);
        coef.iter_mut().zip(&self.eigen).for_each(|(c, l)| *c *= symbol(*l));
        self.inverse(&coef, out);
    }
}
