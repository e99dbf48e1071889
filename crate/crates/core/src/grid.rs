//! Staggered (MAC) grid on the rectangle `(0, lx) x (0, ly)`.
//!
//! Scalars live at cell centres, vector components on the faces normal to
//! them. Cell `(i, j)` has index `j * nx + i`; x-face `(i, j)` sits at
//! `x = i * hx` with index `j * (nx + 1) + i`; y-face `(i, j)` sits at
//! `y = j * hy` with index `j * nx + i`. Faces on the domain boundary carry
//! the boundary-normal components.
//!
//! The discrete gradient and divergence are negative adjoints of each other
//! in the midpoint inner products, so every discrete energy identity used by
//! the solvers holds up to round-off.

use crate::error::{NschError, Result};
use crate::linalg::{self, CgStats};

pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(NschError::Config(format!(
                "grid needs at least {MIN_CELLS} cells per direction, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(NschError::Config(format!("domain lengths must be positive, got {lx} x {ly}")));
        }
        Ok(Grid { nx, ny, lx, ly, hx: lx / nx as f64, hy: ly / ny as f64 })
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    #[inline]
    pub fn y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }
    #[inline]
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    #[inline]
    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }
    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, data: vec![0.0; grid.cells()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, data: vec![c; grid.cells()] }
    }

    /// Samples `f(x, y)` at the cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.cells() {
            return Err(NschError::Config(format!(
                "cell field has {} values, grid needs {}",
                data.len(),
                grid.cells()
            )));
        }
        Ok(ScalarField { grid, data })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, data: self.data.iter().map(|v| f(*v)).collect() }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.cell(i, j)]
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        FaceField { grid, x: vec![0.0; grid.x_faces()], y: vec![0.0; grid.y_faces()] }
    }

    /// Samples the x-component at x-face midpoints and the y-component at
    /// y-face midpoints. Boundary-normal entries are set to zero.
    pub fn from_fn(grid: Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = FaceField::zeros(grid);
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                out.x[grid.xface(i, j)] = fx(i as f64 * grid.hx, (j as f64 + 0.5) * grid.hy);
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                out.y[grid.yface(i, j)] = fy((i as f64 + 0.5) * grid.hx, j as f64 * grid.hy);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute boundary-normal entry.
    pub fn boundary_normal_max(&self) -> f64 {
        let g = self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.ny {
            m = m.max(self.x[g.xface(0, j)].abs()).max(self.x[g.xface(g.nx, j)].abs());
        }
        for i in 0..g.nx {
            m = m.max(self.y[g.yface(i, 0)].abs()).max(self.y[g.yface(i, g.ny)].abs());
        }
        m
    }

    pub fn zero_boundary_normal(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.x[g.xface(0, j)] = 0.0;
            self.x[g.xface(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.y[g.yface(i, 0)] = 0.0;
            self.y[g.yface(i, g.ny)] = 0.0;
        }
    }

    /// Inner product with face measure `hx * hy` on every face.
    pub fn dot(&self, other: &FaceField) -> f64 {
        (linalg::dot(&self.x, &other.x) + linalg::dot(&self.y, &other.y)) * self.grid.cell_volume()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn axpy(&mut self, alpha: f64, other: &FaceField) {
        self.x.iter_mut().zip(&other.x).for_each(|(a, b)| *a += alpha * b);
        self.y.iter_mut().zip(&other.y).for_each(|(a, b)| *a += alpha * b);
    }

    pub fn scaled(&self, alpha: f64) -> FaceField {
        FaceField {
            grid: self.grid,
            x: self.x.iter().map(|v| alpha * v).collect(),
            y: self.y.iter().map(|v| alpha * v).collect(),
        }
    }
}

/// Two-point face gradient; boundary-normal faces are zero (homogeneous Neumann).
pub fn grad_cc_to_face(f: &ScalarField) -> FaceField {
    let g = f.grid;
    let mut out = FaceField::zeros(g);
    grad_into(&g, &f.data, &mut out.x, &mut out.y);
    out
}

pub(crate) fn grad_into(g: &Grid, f: &[f64], gx: &mut [f64], gy: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    for j in 0..ny {
        let row = j * nx;
        let frow = j * (nx + 1);
        gx[frow] = 0.0;
        gx[frow + nx] = 0.0;
        for i in 1..nx {
            gx[frow + i] = (f[row + i] - f[row + i - 1]) / g.hx;
        }
    }
    for i in 0..nx {
        gy[i] = 0.0;
        gy[ny * nx + i] = 0.0;
    }
    for j in 1..ny {
        for i in 0..nx {
            gy[j * nx + i] = (f[j * nx + i] - f[(j - 1) * nx + i]) / g.hy;
        }
    }
}

/// Cell-wise flux balance `(F_E - F_W)/hx + (F_N - F_S)/hy`.
pub fn div_face_to_cc(flux: &FaceField) -> ScalarField {
    let g = flux.grid;
    let mut out = ScalarField::zeros(g);
    div_into(&g, &flux.x, &flux.y, &mut out.data);
    out
}

pub(crate) fn div_into(g: &Grid, fx: &[f64], fy: &[f64], out: &mut [f64]) {
    let nx = g.nx;
    for j in 0..g.ny {
        for i in 0..nx {
            let e = fx[j * (nx + 1) + i + 1];
            let w = fx[j * (nx + 1) + i];
            let n = fy[(j + 1) * nx + i];
            let s = fy[j * nx + i];
            out[j * nx + i] = (e - w) / g.hx + (n - s) / g.hy;
        }
    }
}

/// Five-point Laplacian with mirrored ghost cells. Computed with the same
/// arithmetic as `div_face_to_cc(grad_cc_to_face(f))`, so the two agree bitwise.
pub fn laplace_neumann(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let mut out = ScalarField::zeros(g);
    laplace_into(&g, &f.data, &mut out.data);
    out
}

pub(crate) fn laplace_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = f[j * nx + i];
            let e = if i + 1 < nx { (f[j * nx + i + 1] - c) / g.hx } else { 0.0 };
            let w = if i > 0 { (c - f[j * nx + i - 1]) / g.hx } else { 0.0 };
            let n = if j + 1 < ny { (f[(j + 1) * nx + i] - c) / g.hy } else { 0.0 };
            let s = if j > 0 { (c - f[(j - 1) * nx + i]) / g.hy } else { 0.0 };
            out[j * nx + i] = (e - w) / g.hx + (n - s) / g.hy;
        }
    }
}

/// Conservative first-order upwind discretisation of `div(F phi)`.
pub fn advect_upwind(phi: &ScalarField, flux: &FaceField) -> ScalarField {
    let g = phi.grid;
    let mut face = FaceField::zeros(g);
    let f = &phi.data;
    let nx = g.nx;
    for j in 0..g.ny {
        for i in 1..nx {
            let k = g.xface(i, j);
            let u = flux.x[k];
            let up = if u > 0.0 { f[j * nx + i - 1] } else { f[j * nx + i] };
            face.x[k] = u * up;
        }
    }
    for j in 1..g.ny {
        for i in 0..nx {
            let k = g.yface(i, j);
            let v = flux.y[k];
            let up = if v > 0.0 { f[(j - 1) * nx + i] } else { f[j * nx + i] };
            face.y[k] = v * up;
        }
    }
    div_face_to_cc(&face)
}

/// `div(beta grad f)` with Neumann boundaries; only interior faces of `beta` are read.
pub fn apply_varcoef(beta: &FaceField, f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let mut out = ScalarField::zeros(g);
    let mut gx = vec![0.0; g.x_faces()];
    let mut gy = vec![0.0; g.y_faces()];
    varcoef_into(&g, &beta.x, &beta.y, &f.data, &mut gx, &mut gy, &mut out.data);
    out
}

pub(crate) fn varcoef_into(
    g: &Grid,
    bx: &[f64],
    by: &[f64],
    f: &[f64],
    gx: &mut [f64],
    gy: &mut [f64],
    out: &mut [f64],
) {
    grad_into(g, f, gx, gy);
    gx.iter_mut().zip(bx).for_each(|(a, b)| *a *= b);
    gy.iter_mut().zip(by).for_each(|(a, b)| *a *= b);
    div_into(g, gx, gy, out);
}

/// Largest step allowed by the advective CFL condition `dt <= 0.5 h / |v|_inf`.
pub fn advective_dt_bound(v: &FaceField) -> f64 {
    let vmax = v.max_abs();
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        0.5 * v.grid.h_min() / vmax
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Magnitude of the data the right-hand side was formed from; the
    /// compatibility check allows a mean of `1e-10` times the larger of this
    /// and the right-hand side itself, so round-off residues pass.
    pub rhs_scale: f64,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions { tol: 1e-10, max_iter: None, rhs_scale: 0.0 }
    }
}

/// Solves `div(beta grad f) = rhs` with homogeneous Neumann data and `mean(f) = 0`.
pub fn solve_poisson_varcoef(beta: &FaceField, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    solve_poisson_with(beta, rhs, None, PoissonOptions { tol, ..Default::default() }).map(|(f, _)| f)
}

/// Like [`solve_poisson_varcoef`], with an optional initial guess and iteration cap
/// (default `10 * nx * ny`).
pub fn solve_poisson_with(
    beta: &FaceField,
    rhs: &ScalarField,
    guess: Option<&ScalarField>,
    opts: PoissonOptions,
) -> Result<(ScalarField, CgStats)> {
    let g = rhs.grid;
    let norm = rhs.max_abs();
    let mean = rhs.mean();
    if mean.abs() > 1e-10 * norm.max(opts.rhs_scale) {
        return Err(NschError::IncompatibleRhs { mean, norm });
    }
    if !rhs.is_finite() || !beta.is_finite() {
        return Err(NschError::NonFinite("Poisson data"));
    }
    // -div(beta grad) is positive semi-definite; solve with the sign flipped.
    let b: Vec<f64> = rhs.data.iter().map(|v| -(v - mean)).collect();
    let diag = varcoef_diagonal(&g, beta);
    let mut x = match guess {
        Some(f) => f.data.clone(),
        None => vec![0.0; g.cells()],
    };
    let mut gx = vec![0.0; g.x_faces()];
    let mut gy = vec![0.0; g.y_faces()];
    let max_iter = opts.max_iter.unwrap_or(10 * g.cells());
    let stats = linalg::pcg(
        |p, q| {
            varcoef_into(&g, &beta.x, &beta.y, p, &mut gx, &mut gy, q);
            q.iter_mut().for_each(|v| *v = -*v);
        },
        &diag,
        &b,
        &mut x,
        opts.tol,
        max_iter,
        true,
    )?;
    Ok((ScalarField { grid: g, data: x }, stats))
}

/// Diagonal of `-div(beta grad)`.
pub(crate) fn varcoef_diagonal(g: &Grid, beta: &FaceField) -> Vec<f64> {
    let mut d = vec![0.0; g.cells()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let mut s = 0.0;
            if i > 0 {
                s += beta.x[g.xface(i, j)] / (g.hx * g.hx);
            }
            if i + 1 < g.nx {
                s += beta.x[g.xface(i + 1, j)] / (g.hx * g.hx);
            }
            if j > 0 {
                s += beta.y[g.yface(i, j)] / (g.hy * g.hy);
            }
            if j + 1 < g.ny {
                s += beta.y[g.yface(i, j + 1)] / (g.hy * g.hy);
            }
            d[g.cell(i, j)] = s;
        }
    }
    d
}

/// Arithmetic mean of the two cells adjacent to each interior face; boundary faces are zero.
pub fn face_average(f: &ScalarField) -> FaceField {
    face_map(f, |l, r| 0.5 * (l + r))
}

/// Applies `op(left, right)` on every interior face; boundary faces are zero.
pub fn face_map(f: &ScalarField, op: impl Fn(f64, f64) -> f64) -> FaceField {
    let g = f.grid;
    let mut out = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.x[g.xface(i, j)] = op(f.at(i - 1, j), f.at(i, j));
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.y[g.yface(i, j)] = op(f.at(i, j - 1), f.at(i, j));
        }
    }
    out
}
