//! Variable-density incompressible flow on the MAC grid.
//!
//! One step is a momentum predictor (explicit upwind advection by the mass
//! flux `rho v + beta J`, explicit capillary force, implicit viscosity)
//! followed by a projection with `1/rho` weighting. The viscous operator is
//! the gradient of the discrete dissipation functional
//! `Phi(v) = 1/2 sum 2 eta |D_h v|^2`, so it is symmetric positive definite and
//! the reported viscous dissipation is exactly `2 Phi`.

use crate::error::{NschError, Result};
use crate::grid::{self, FaceField, Grid, PoissonOptions, ScalarField};
use crate::linalg::{self, CgStats};
use crate::material::MaterialModel;
use crate::phasefield::{self, PhaseState};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub v: FaceField,
    pub g: ScalarField,
    pub rho: ScalarField,
    pub t: f64,
}

impl FlowState {
    pub fn new(v: FaceField, phi: &ScalarField, m: &MaterialModel) -> Self {
        let g = phi.grid;
        FlowState { v, g: ScalarField::zeros(g), rho: phi.map(|s| m.density(s)), t: 0.0 }
    }

    pub fn at_rest(phi: &ScalarField, m: &MaterialModel) -> Self {
        Self::new(FaceField::zeros(phi.grid), phi, m)
    }

    pub fn grid(&self) -> Grid {
        self.rho.grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Relative residual of the pressure solve.
    pub pressure_tol: f64,
    /// Relative residual of the viscous solve.
    pub viscous_tol: f64,
    pub max_iter: Option<usize>,
    pub enforce_stability: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { pressure_tol: 1e-10, viscous_tol: 1e-12, max_iter: None, enforce_stability: true }
    }
}

/// Arithmetic mean of the adjacent cell densities on interior faces.
pub fn face_density(rho: &ScalarField) -> FaceField {
    grid::face_average(rho)
}

/// `-avg(sqrt(a) lap_h A(phi)) grad_h phi` on every interior face.
pub fn capillary_force(phi: &ScalarField, m: &MaterialModel) -> Result<FaceField> {
    let lap = grid::laplace_neumann(&phasefield::a_field(phi, m)?);
    let c = ScalarField { grid: phi.grid, data: phi.data.iter().zip(&lap.data).map(|(s, l)| m.sqrt_a(*s) * l).collect() };
    let cf = grid::face_average(&c);
    let mut f = grid::grad_cc_to_face(phi);
    f.x.iter_mut().zip(&cf.x).for_each(|(g, c)| *g *= -c);
    f.y.iter_mut().zip(&cf.y).for_each(|(g, c)| *g *= -c);
    if !f.is_finite() {
        return Err(NschError::NonFinite("capillary force"));
    }
    Ok(f)
}

/// `beta J`, the diffusive part of the momentum-carrying mass flux.
pub fn beta_j(beta: f64, j: &FaceField) -> FaceField {
    j.scaled(beta)
}

/// Mass flux `rho_face v + beta J`, or `rho_face v` when the correction is compiled out.
pub fn mass_flux<const WITH_BETA_J: bool>(rho: &ScalarField, v: &FaceField, beta: f64, j: &FaceField) -> FaceField {
    let rf = face_density(rho);
    let mut f = FaceField::zeros(v.grid);
    for k in 0..f.x.len() {
        f.x[k] = rf.x[k] * v.x[k];
    }
    for k in 0..f.y.len() {
        f.y[k] = rf.y[k] * v.y[k];
    }
    if WITH_BETA_J {
        f.axpy(1.0, &beta_j(beta, j));
    }
    f
}

/// Conservative upwind advection `div(F (x) v)` on the staggered control volumes.
pub fn advect_momentum(flux: &FaceField, v: &FaceField) -> FaceField {
    let g = v.grid;
    let (nx, ny) = (g.nx, g.ny);
    let up = |f: f64, a: f64, b: f64| if f > 0.0 { f * a } else { f * b };
    let mut out = FaceField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            let u = |i: usize, j: usize| v.x[g.xface(i, j)];
            let fe = 0.5 * (flux.x[g.xface(i, j)] + flux.x[g.xface(i + 1, j)]);
            let fw = 0.5 * (flux.x[g.xface(i - 1, j)] + flux.x[g.xface(i, j)]);
            let east = up(fe, u(i, j), u(i + 1, j));
            let west = up(fw, u(i - 1, j), u(i, j));
            let north = if j + 1 < ny {
                let fnn = 0.5 * (flux.y[g.yface(i - 1, j + 1)] + flux.y[g.yface(i, j + 1)]);
                up(fnn, u(i, j), u(i, j + 1))
            } else {
                0.0
            };
            let south = if j > 0 {
                let fs = 0.5 * (flux.y[g.yface(i - 1, j)] + flux.y[g.yface(i, j)]);
                up(fs, u(i, j - 1), u(i, j))
            } else {
                0.0
            };
            out.x[g.xface(i, j)] = (east - west) / g.hx + (north - south) / g.hy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let w = |i: usize, j: usize| v.y[g.yface(i, j)];
            let fnn = 0.5 * (flux.y[g.yface(i, j)] + flux.y[g.yface(i, j + 1)]);
            let fs = 0.5 * (flux.y[g.yface(i, j - 1)] + flux.y[g.yface(i, j)]);
            let north = up(fnn, w(i, j), w(i, j + 1));
            let south = up(fs, w(i, j - 1), w(i, j));
            let east = if i + 1 < nx {
                let fe = 0.5 * (flux.x[g.xface(i + 1, j - 1)] + flux.x[g.xface(i + 1, j)]);
                up(fe, w(i, j), w(i + 1, j))
            } else {
                0.0
            };
            let west = if i > 0 {
                let fw = 0.5 * (flux.x[g.xface(i, j - 1)] + flux.x[g.xface(i, j)]);
                up(fw, w(i - 1, j), w(i, j))
            } else {
                0.0
            };
            out.y[g.yface(i, j)] = (east - west) / g.hx + (north - south) / g.hy;
        }
    }
    out
}

/// Cell and node viscosities for the viscous operator.
#[derive(Debug, Clone)]
pub struct ViscosityField {
    grid: Grid,
    cell: Vec<f64>,
    node: Vec<f64>,
}

impl ViscosityField {
    pub fn new(phi: &ScalarField, m: &MaterialModel) -> Self {
        let g = phi.grid;
        let cell: Vec<f64> = phi.data.iter().map(|s| m.viscosity(*s)).collect();
        let mut node = vec![0.0; (g.nx + 1) * (g.ny + 1)];
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (mut s, mut c) = (0.0, 0.0);
                for (ci, cj) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)] {
                    if ci < g.nx && cj < g.ny {
                        s += cell[g.cell(ci, cj)];
                        c += 1.0;
                    }
                }
                node[j * (g.nx + 1) + i] = s / c;
            }
        }
        ViscosityField { grid: g, cell, node }
    }

    /// Shear-rate stencils at node `(i, j)`: `(face, coefficient)` pairs for
    /// `du/dy` (x-faces) and `dv/dx` (y-faces), with no-slip ghost values at walls,
    /// plus the node weight relative to `hx hy`.
    fn node_stencil(&self, i: usize, j: usize) -> ([(usize, f64); 2], [(usize, f64); 2], f64) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let none = [(0, 0.0), (0, 0.0)];
        let du = if i == 0 || i == nx {
            none
        } else if j == 0 {
            [(g.xface(i, 0), 2.0 / g.hy), (0, 0.0)]
        } else if j == ny {
            [(g.xface(i, ny - 1), -2.0 / g.hy), (0, 0.0)]
        } else {
            [(g.xface(i, j), 1.0 / g.hy), (g.xface(i, j - 1), -1.0 / g.hy)]
        };
        let dv = if j == 0 || j == ny {
            none
        } else if i == 0 {
            [(g.yface(0, j), 2.0 / g.hx), (0, 0.0)]
        } else if i == nx {
            [(g.yface(nx - 1, j), -2.0 / g.hx), (0, 0.0)]
        } else {
            [(g.yface(i, j), 1.0 / g.hx), (g.yface(i - 1, j), -1.0 / g.hx)]
        };
        let wx = if i == 0 || i == nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == ny { 0.5 } else { 1.0 };
        (du, dv, wx * wy)
    }

    /// `out = (1 / (hx hy)) dPhi/dv`, i.e. `-div(2 eta D v)` on interior faces.
    pub fn apply(&self, u: &[f64], v: &[f64], ou: &mut [f64], ov: &mut [f64]) {
        let g = self.grid;
        ou.iter_mut().for_each(|x| *x = 0.0);
        ov.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let eta = self.cell[g.cell(i, j)];
                let sxx = 2.0 * eta * (u[g.xface(i + 1, j)] - u[g.xface(i, j)]) / g.hx;
                ou[g.xface(i + 1, j)] += sxx / g.hx;
                ou[g.xface(i, j)] -= sxx / g.hx;
                let syy = 2.0 * eta * (v[g.yface(i, j + 1)] - v[g.yface(i, j)]) / g.hy;
                ov[g.yface(i, j + 1)] += syy / g.hy;
                ov[g.yface(i, j)] -= syy / g.hy;
            }
        }
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (du, dv, w) = self.node_stencil(i, j);
                let gamma: f64 = du.iter().map(|(k, c)| c * u[*k]).sum::<f64>() + dv.iter().map(|(k, c)| c * v[*k]).sum::<f64>();
                let tau = w * self.node[j * (g.nx + 1) + i] * gamma;
                for (k, c) in du {
                    ou[k] += tau * c;
                }
                for (k, c) in dv {
                    ov[k] += tau * c;
                }
            }
        }
        for j in 0..g.ny {
            ou[g.xface(0, j)] = 0.0;
            ou[g.xface(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            ov[g.yface(i, 0)] = 0.0;
            ov[g.yface(i, g.ny)] = 0.0;
        }
    }

    /// Diagonal of [`ViscosityField::apply`].
    pub fn diagonal(&self) -> FaceField {
        let g = self.grid;
        let mut d = FaceField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let eta = self.cell[g.cell(i, j)];
                d.x[g.xface(i + 1, j)] += 2.0 * eta / (g.hx * g.hx);
                d.x[g.xface(i, j)] += 2.0 * eta / (g.hx * g.hx);
                d.y[g.yface(i, j + 1)] += 2.0 * eta / (g.hy * g.hy);
                d.y[g.yface(i, j)] += 2.0 * eta / (g.hy * g.hy);
            }
        }
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (du, dv, w) = self.node_stencil(i, j);
                let eta = self.node[j * (g.nx + 1) + i];
                for (k, c) in du {
                    d.x[k] += w * eta * c * c;
                }
                for (k, c) in dv {
                    d.y[k] += w * eta * c * c;
                }
            }
        }
        d.zero_boundary_normal();
        d
    }

    /// `int 2 eta |D v|^2`, which equals `v . apply(v)` in the face inner product.
    pub fn dissipation(&self, v: &FaceField) -> f64 {
        let g = self.grid;
        let (u, w) = (&v.x, &v.y);
        let mut cells = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let exx = (u[g.xface(i + 1, j)] - u[g.xface(i, j)]) / g.hx;
                let eyy = (w[g.yface(i, j + 1)] - w[g.yface(i, j)]) / g.hy;
                cells += 2.0 * self.cell[g.cell(i, j)] * (exx * exx + eyy * eyy);
            }
        }
        let mut nodes = 0.0;
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (du, dv, wt) = self.node_stencil(i, j);
                let gamma: f64 = du.iter().map(|(k, c)| c * u[*k]).sum::<f64>() + dv.iter().map(|(k, c)| c * w[*k]).sum::<f64>();
                nodes += wt * self.node[j * (g.nx + 1) + i] * gamma * gamma;
            }
        }
        (cells + nodes) * g.cell_volume()
    }
}

/// `int 2 eta(phi) |D_h v|^2`.
pub fn viscous_dissipation(v: &FaceField, phi: &ScalarField, m: &MaterialModel) -> f64 {
    ViscosityField::new(phi, m).dissipation(v)
}

/// `sum rho_face |v|^2 / 2` over faces.
pub fn kinetic_energy(v: &FaceField, rho: &ScalarField) -> f64 {
    let rf = face_density(rho);
    let s: f64 = v.x.iter().zip(&rf.x).map(|(a, r)| r * a * a).sum::<f64>() + v.y.iter().zip(&rf.y).map(|(a, r)| r * a * a).sum::<f64>();
    0.5 * s * v.grid.cell_volume()
}

/// Solves `(rho_new / dt + V) v* = rhs` for the interior faces.
fn solve_viscous(rho_new: &ScalarField, visc: &ViscosityField, rhs: &FaceField, guess: &FaceField, dt: f64, opts: &FlowOptions) -> Result<(FaceField, CgStats)> {
    let g = rho_new.grid;
    let nxf = g.x_faces();
    let rf = face_density(rho_new);
    let mut mass = FaceField::zeros(g);
    mass.x.iter_mut().zip(&rf.x).for_each(|(m, r)| *m = r / dt);
    mass.y.iter_mut().zip(&rf.y).for_each(|(m, r)| *m = r / dt);
    // boundary-normal unknowns are decoupled with unit diagonal and zero rhs
    let interior = {
        let mut f = FaceField { grid: g, x: vec![1.0; nxf], y: vec![1.0; g.y_faces()] };
        f.zero_boundary_normal();
        f
    };
    let vd = visc.diagonal();
    let diag: Vec<f64> = (0..nxf)
        .map(|k| if interior.x[k] == 1.0 { mass.x[k] + vd.x[k] } else { 1.0 })
        .chain((0..g.y_faces()).map(|k| if interior.y[k] == 1.0 { mass.y[k] + vd.y[k] } else { 1.0 }))
        .collect();
    let mut b: Vec<f64> = rhs.x.iter().chain(&rhs.y).copied().collect();
    let mask: Vec<f64> = interior.x.iter().chain(&interior.y).copied().collect();
    b.iter_mut().zip(&mask).for_each(|(b, m)| *b *= m);
    let mut x: Vec<f64> = guess.x.iter().chain(&guess.y).copied().collect();
    x.iter_mut().zip(&mask).for_each(|(x, m)| *x *= m);
    let massv: Vec<f64> = mass.x.iter().chain(&mass.y).copied().collect();
    let max_iter = opts.max_iter.unwrap_or(10 * g.cells());
    let stats = linalg::pcg(
        |p, q| {
            let (pu, pv) = p.split_at(nxf);
            let (qu, qv) = q.split_at_mut(nxf);
            visc.apply(pu, pv, qu, qv);
            for k in 0..q.len() {
                q[k] = if mask[k] == 1.0 { q[k] + massv[k] * p[k] } else { p[k] };
            }
        },
        &diag,
        &b,
        &mut x,
        opts.viscous_tol,
        max_iter,
        false,
    )?;
    let y = x.split_off(nxf);
    let mut out = FaceField { grid: g, x, y };
    out.zero_boundary_normal();
    Ok((out, stats))
}

/// Momentum predictor with the mass-flux correction switched by `WITH_BETA_J`.
pub fn momentum_predictor_variant<const WITH_BETA_J: bool>(
    flow: &FlowState,
    phase: &PhaseState,
    dt: f64,
    m: &MaterialModel,
    opts: &FlowOptions,
) -> Result<FaceField> {
    if opts.enforce_stability {
        let bound = grid::advective_dt_bound(&flow.v);
        if dt > 1.1 * bound {
            return Err(NschError::StabilityViolation { dt, bound, what: "advective CFL condition" });
        }
    }
    let g = flow.grid();
    let rho_new = phase.phi.map(|s| m.density(s));
    let flux = mass_flux::<WITH_BETA_J>(&flow.rho, &flow.v, m.beta, &phase.j);
    let adv = advect_momentum(&flux, &flow.v);
    let cap = capillary_force(&phase.phi, m)?;
    let rf_old = face_density(&flow.rho);
    let mut rhs = FaceField::zeros(g);
    for k in 0..rhs.x.len() {
        rhs.x[k] = rf_old.x[k] * flow.v.x[k] / dt - adv.x[k] + cap.x[k];
    }
    for k in 0..rhs.y.len() {
        rhs.y[k] = rf_old.y[k] * flow.v.y[k] / dt - adv.y[k] + cap.y[k];
    }
    let visc = ViscosityField::new(&phase.phi, m);
    let (vstar, _) = solve_viscous(&rho_new, &visc, &rhs, &flow.v, dt, opts)?;
    if !vstar.is_finite() {
        return Err(NschError::NonFinite("momentum predictor"));
    }
    Ok(vstar)
}

pub fn momentum_predictor(flow: &FlowState, phase: &PhaseState, dt: f64, m: &MaterialModel, opts: &FlowOptions) -> Result<FaceField> {
    if cfg!(feature = "drop-mass-flux-correction") {
        momentum_predictor_variant::<false>(flow, phase, dt, m, opts)
    } else {
        momentum_predictor_variant::<true>(flow, phase, dt, m, opts)
    }
}

/// `v = v* - dt / rho_face grad g` with `div((1/rho_face) grad g) = div v* / dt`.
pub fn project(vstar: &FaceField, rho: &ScalarField, dt: f64, tol: f64) -> Result<(FaceField, ScalarField)> {
    project_with(vstar, rho, dt, None, PoissonOptions { tol, ..Default::default() }).map(|(v, g, _)| (v, g))
}

/// [`project`] with an initial pressure guess.
pub fn project_with(
    vstar: &FaceField,
    rho: &ScalarField,
    dt: f64,
    guess: Option<&ScalarField>,
    opts: PoissonOptions,
) -> Result<(FaceField, ScalarField, CgStats)> {
    let g = vstar.grid;
    let inv_rho = grid::face_map(rho, |l, r| 2.0 / (l + r));
    let mut rhs = grid::div_face_to_cc(vstar);
    rhs.data.iter_mut().for_each(|d| *d /= dt);
    let scale = vstar.max_abs() / (g.h_min() * dt);
    let opts = PoissonOptions { rhs_scale: opts.rhs_scale.max(scale), ..opts };
    let (p, stats) = grid::solve_poisson_with(&inv_rho, &rhs, guess, opts)?;
    let gp = grid::grad_cc_to_face(&p);
    let mut v = vstar.clone();
    for k in 0..v.x.len() {
        v.x[k] -= dt * inv_rho.x[k] * gp.x[k];
    }
    for k in 0..v.y.len() {
        v.y[k] -= dt * inv_rho.y[k] * gp.y[k];
    }
    v.zero_boundary_normal();
    Ok((v, p, stats))
}

/// Full flow step given the phase state at the new time level.
pub fn step_ns_variant<const WITH_BETA_J: bool>(
    flow: &FlowState,
    phase: &PhaseState,
    dt: f64,
    m: &MaterialModel,
    opts: &FlowOptions,
) -> Result<FlowState> {
    let vstar = momentum_predictor_variant::<WITH_BETA_J>(flow, phase, dt, m, opts)?;
    let rho = phase.phi.map(|s| m.density(s));
    let popts = PoissonOptions { tol: opts.pressure_tol, max_iter: opts.max_iter, ..Default::default() };
    let (v, g, _) = project_with(&vstar, &rho, dt, Some(&flow.g), popts)?;
    Ok(FlowState { v, g, rho, t: flow.t + dt })
}

pub fn step_ns(flow: &FlowState, phase: &PhaseState, dt: f64, m: &MaterialModel, opts: &FlowOptions) -> Result<FlowState> {
    if cfg!(feature = "drop-mass-flux-correction") {
        step_ns_variant::<false>(flow, phase, dt, m, opts)
    } else {
        step_ns_variant::<true>(flow, phase, dt, m, opts)
    }
}

/// Diagnostic physical pressure `p = g - a(phi) |grad_h phi|^2 / 2`, with the
/// squared gradient averaged from the faces to the cells.
pub fn physical_pressure(flow: &FlowState, phi: &ScalarField, m: &MaterialModel) -> ScalarField {
    let g = phi.grid;
    let gp = grid::grad_cc_to_face(phi);
    let mut p = flow.g.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let gx2 = 0.5 * (gp.x[g.xface(i, j)].powi(2) + gp.x[g.xface(i + 1, j)].powi(2));
            let gy2 = 0.5 * (gp.y[g.yface(i, j)].powi(2) + gp.y[g.yface(i, j + 1)].powi(2));
            let s = phi.at(i, j);
            p.data[g.cell(i, j)] -= 0.5 * m.coef_a(s) * (gx2 + gy2);
        }
    }
    p
}
