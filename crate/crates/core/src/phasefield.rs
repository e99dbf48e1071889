//! Cahn-Hilliard subsystem: chemical potential, degenerate flux and the
//! conservative update of the order parameter.
//!
//! Both time schemes finish with `phi^{n+1} = phi^n - dt (adv + div J)` where
//! `J` is the stored face flux, so the discrete mass is conserved to round-off
//! regardless of how accurately the inner linear system was solved.

use crate::error::{NschError, Result};
use crate::grid::{self, FaceField, Grid, ScalarField};
use crate::linalg::{self, NeumannDct};
use crate::material::MaterialModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChScheme {
    /// Linearly implicit, stabilised; requires a constant gradient coefficient.
    Stabilized,
    /// Forward Euler on the fourth-order operator; any coefficient.
    Explicit,
}

/// How the stabilisation constant `S` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stabilization {
    /// `max |psi_eps''|` over the range actually visited by the step, with retries.
    Adaptive,
    /// `max |psi_eps''|` over the whole clipped interval.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChOptions {
    pub scheme: ChScheme,
    pub stabilization: Stabilization,
    pub tol: f64,
    pub max_iter: usize,
    pub enforce_stability: bool,
    /// Constant in the explicit bound `dt <= C h^4 / (max m_eps max a)`.
    pub explicit_c_stab: f64,
}

impl Default for ChOptions {
    fn default() -> Self {
        ChOptions {
            scheme: ChScheme::Stabilized,
            stabilization: Stabilization::Adaptive,
            tol: 1e-10,
            max_iter: 2000,
            enforce_stability: true,
            explicit_c_stab: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub j: FaceField,
    pub jhat: FaceField,
    pub t: f64,
}

impl PhaseState {
    /// State at `t = 0` with `mu` and the fluxes evaluated at `phi`.
    pub fn new(phi: ScalarField, m: &MaterialModel) -> Result<Self> {
        let mu = chemical_potential(&phi, m)?;
        let (j, jhat) = flux(&phi, &mu, m);
        Ok(PhaseState { phi, mu, j, jhat, t: 0.0 })
    }

    pub fn grid(&self) -> Grid {
        self.phi.grid
    }

    /// `max(0, max |phi| - 1)`.
    pub fn overshoot(&self) -> f64 {
        (self.phi.max_abs() - 1.0).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChStepInfo {
    pub stabilization: f64,
    pub iterations: usize,
    pub attempts: usize,
}

/// `A(phi)` cell by cell.
pub fn a_field(phi: &ScalarField, m: &MaterialModel) -> Result<ScalarField> {
    let data = phi.data.iter().map(|s| m.a_of(*s)).collect::<Result<Vec<_>>>()?;
    Ok(ScalarField { grid: phi.grid, data })
}

/// `mu = psi_eps'(phi) - sqrt(a(phi)) lap_h A(phi)`, singular part clamped.
pub fn chemical_potential(phi: &ScalarField, m: &MaterialModel) -> Result<ScalarField> {
    let lap = grid::laplace_neumann(&a_field(phi, m)?);
    let data: Vec<f64> = phi
        .data
        .iter()
        .zip(&lap.data)
        .map(|(s, l)| m.psi_eps_prime_clamped(*s) - m.sqrt_a(*s) * l)
        .collect();
    let mu = ScalarField { grid: phi.grid, data };
    if !mu.is_finite() {
        return Err(NschError::NonFinite("chemical potential"));
    }
    Ok(mu)
}

/// Same quantity through the reparametrised potential:
/// `mu = sqrt(a(phi)) (psi_tilde_eps'(A(phi)) - lap_h A(phi))`.
pub fn chemical_potential_reparametrized(phi: &ScalarField, m: &MaterialModel) -> Result<ScalarField> {
    let big_a = a_field(phi, m)?;
    let lap = grid::laplace_neumann(&big_a);
    let mut data = Vec::with_capacity(phi.data.len());
    for ((s, r), l) in phi.data.iter().zip(&big_a.data).zip(&lap.data) {
        data.push(m.sqrt_a(*s) * (m.psi_tilde_eps_prime(*r)? - l));
    }
    let mu = ScalarField { grid: phi.grid, data };
    if !mu.is_finite() {
        return Err(NschError::NonFinite("chemical potential"));
    }
    Ok(mu)
}

/// `m_eps` of the two-cell average on every interior face, clamped to `[0, 1]`.
pub fn face_mobility(phi: &ScalarField, m: &MaterialModel) -> FaceField {
    grid::face_map(phi, |l, r| m.mobility_eps(0.5 * (l + r)).clamp(0.0, 1.0))
}

/// `(J, Jhat)` with `Jhat = -sqrt(m_face) grad mu` and `J = sqrt(m_face) Jhat`.
pub fn flux(phi: &ScalarField, mu: &ScalarField, m: &MaterialModel) -> (FaceField, FaceField) {
    flux_with_mobility(&face_mobility(phi, m), mu)
}

pub fn flux_with_mobility(mob: &FaceField, mu: &ScalarField) -> (FaceField, FaceField) {
    let mut jhat = grid::grad_cc_to_face(mu);
    let mut j = FaceField::zeros(mu.grid);
    for ((h, jj), mf) in jhat.x.iter_mut().zip(j.x.iter_mut()).zip(&mob.x) {
        let r = mf.sqrt();
        *h *= -r;
        *jj = r * *h;
    }
    for ((h, jj), mf) in jhat.y.iter_mut().zip(j.y.iter_mut()).zip(&mob.y) {
        let r = mf.sqrt();
        *h *= -r;
        *jj = r * *h;
    }
    jhat.zero_boundary_normal();
    j.zero_boundary_normal();
    (j, jhat)
}

/// `|sum J . eta - sum mu div(m eta)|`, with the mobility evaluated in the
/// cells and averaged to the faces. The two sums agree up to the difference
/// between that average and the face mobility used to build `J`.
pub fn weak_flux_residual(state: &PhaseState, m: &MaterialModel, eta: &FaceField) -> f64 {
    let lhs = state.j.dot(eta);
    let mcell = state.phi.map(|s| m.mobility_eps(s));
    let mut weighted = grid::face_average(&mcell);
    weighted.x.iter_mut().zip(&eta.x).for_each(|(w, e)| *w *= e);
    weighted.y.iter_mut().zip(&eta.y).for_each(|(w, e)| *w *= e);
    let div = grid::div_face_to_cc(&weighted);
    let rhs = linalg::dot(&state.mu.data, &div.data) * state.grid().cell_volume();
    (lhs - rhs).abs()
}

/// Explicit-scheme step limit `C h^4 / (max m_face max a)`.
pub fn explicit_dt_bound(phi: &ScalarField, m: &MaterialModel, c_stab: f64) -> f64 {
    let mob = face_mobility(phi, m);
    let mmax = mob.max_abs();
    let (a_lo, a_hi) = (m.coef_a(0.0), m.coef_a(1.0));
    let amax = a_lo.max(a_hi);
    if mmax == 0.0 {
        return f64::INFINITY;
    }
    c_stab * phi.grid.h_min().powi(4) / (mmax * amax)
}

const MAX_ATTEMPTS: usize = 8;

/// Owns the per-grid work data of the Cahn-Hilliard step.
#[derive(Debug, Clone)]
pub struct ChStepper {
    pub opts: ChOptions,
    dct: Option<(Grid, NeumannDct)>,
}

impl ChStepper {
    pub fn new(opts: ChOptions) -> Self {
        ChStepper { opts, dct: None }
    }

    fn dct(&mut self, g: Grid) -> &NeumannDct {
        if self.dct.as_ref().map(|(dg, _)| *dg != g).unwrap_or(true) {
            self.dct = Some((g, NeumannDct::new(g.nx, g.ny, g.hx, g.hy)));
        }
        &self.dct.as_ref().expect("set above").1
    }

    pub fn step(&mut self, state: &PhaseState, v: &FaceField, dt: f64, m: &MaterialModel) -> Result<(PhaseState, ChStepInfo)> {
        if !(dt > 0.0) {
            return Err(NschError::Config(format!("time step must be positive, got {dt}")));
        }
        if self.opts.enforce_stability {
            let bound = grid::advective_dt_bound(v);
            if dt > 1.1 * bound {
                return Err(NschError::StabilityViolation { dt, bound, what: "advective CFL condition" });
            }
        }
        let adv = if v.max_abs() == 0.0 {
            ScalarField::zeros(state.grid())
        } else {
            grid::advect_upwind(&state.phi, v)
        };
        match self.opts.scheme {
            ChScheme::Explicit => self.step_explicit(state, &adv, dt, m),
            ChScheme::Stabilized => self.step_stabilized(state, &adv, dt, m),
        }
    }

    fn finish(state: &PhaseState, adv: &ScalarField, dt: f64, mu: ScalarField, mob: &FaceField) -> Result<PhaseState> {
        let (j, jhat) = flux_with_mobility(mob, &mu);
        let div = grid::div_face_to_cc(&j);
        let data: Vec<f64> = state
            .phi
            .data
            .iter()
            .zip(&adv.data)
            .zip(&div.data)
            .map(|((p, a), d)| p - dt * (a + d))
            .collect();
        let phi = ScalarField { grid: state.grid(), data };
        if !phi.is_finite() {
            return Err(NschError::NonFinite("phase-field update"));
        }
        Ok(PhaseState { phi, mu, j, jhat, t: state.t + dt })
    }

    fn step_explicit(&mut self, state: &PhaseState, adv: &ScalarField, dt: f64, m: &MaterialModel) -> Result<(PhaseState, ChStepInfo)> {
        if self.opts.enforce_stability {
            let bound = explicit_dt_bound(&state.phi, m, self.opts.explicit_c_stab);
            if dt > 1.1 * bound {
                return Err(NschError::StabilityViolation { dt, bound, what: "explicit Cahn-Hilliard scheme" });
            }
        }
        let mu = chemical_potential(&state.phi, m)?;
        let mob = face_mobility(&state.phi, m);
        let next = Self::finish(state, adv, dt, mu, &mob)?;
        Ok((next, ChStepInfo { stabilization: 0.0, iterations: 0, attempts: 1 }))
    }

    fn step_stabilized(&mut self, state: &PhaseState, adv: &ScalarField, dt: f64, m: &MaterialModel) -> Result<(PhaseState, ChStepInfo)> {
        let a0 = m.coefficient.constant_value().ok_or_else(|| {
            NschError::Unsupported("the stabilized scheme needs a constant gradient coefficient; use the explicit scheme".into())
        })?;
        let g = state.grid();
        let n = g.cells();
        let opts = self.opts;
        let mu0 = chemical_potential(&state.phi, m)?;
        let mob = face_mobility(&state.phi, m);
        let mmax = mob.max_abs().max(f64::MIN_POSITIVE);

        // r0 = -adv - B mu0 with B = -div(M grad)
        let mut r0 = grid::apply_varcoef(&mob, &mu0);
        r0.data.iter_mut().zip(&adv.data).for_each(|(r, a)| *r -= a);

        let mut lap = vec![0.0; n];
        let mut gx = vec![0.0; g.x_faces()];
        let mut gy = vec![0.0; g.y_faces()];
        let mut bk = vec![0.0; n];
        let mut kx = vec![0.0; n];

        let dct = self.dct(g);
        let (mut lo, mut hi) = (state.phi.min(), state.phi.max());
        let mut iterations = 0;
        let mut result = None;
        for attempt in 1..=MAX_ATTEMPTS {
            let s = match opts.stabilization {
                Stabilization::Adaptive => m.max_abs_psi_eps_second(lo, hi).max(1.0),
                Stabilization::Global => m.max_abs_psi_eps_second(-1.0, 1.0).max(1.0),
            };
            let apply_k = |x: &[f64], out: &mut [f64], lap: &mut [f64]| {
                grid::laplace_into(&g, x, lap);
                for i in 0..x.len() {
                    out[i] = s * x[i] - a0 * lap[i];
                }
            };
            let mut rhs = vec![0.0; n];
            apply_k(&r0.data, &mut rhs, &mut lap);

            let mut delta = vec![0.0; n];
            let stats = linalg::pcg_with(
                |x, y| {
                    apply_k(x, &mut kx, &mut lap);
                    // y = K x / dt + K B K x, B = -div(M grad)
                    grid::varcoef_into(&g, &mob.x, &mob.y, &kx, &mut gx, &mut gy, &mut bk);
                    bk.iter_mut().for_each(|v| *v = -*v);
                    apply_k(&bk, y, &mut lap);
                    for i in 0..x.len() {
                        y[i] += kx[i] / dt;
                    }
                },
                |r, z| {
                    dct.apply_symbol(r, z, |l| {
                        let k = a0 * l + s;
                        1.0 / (k / dt + mmax * k * k * l)
                    })
                },
                &rhs,
                &mut delta,
                opts.tol,
                opts.max_iter,
                false,
            )?;
            iterations += stats.iterations;

            let mut kd = vec![0.0; n];
            apply_k(&delta, &mut kd, &mut lap);
            let mut mu = mu0.clone();
            mu.data.iter_mut().zip(&kd).for_each(|(u, k)| *u += k);
            let next = Self::finish(state, adv, dt, mu, &mob)?;
            let (nlo, nhi) = (next.phi.min(), next.phi.max());
            let covered = nlo >= lo && nhi <= hi;
            result = Some((next, ChStepInfo { stabilization: s, iterations, attempts: attempt }));
            if covered || opts.stabilization == Stabilization::Global {
                break;
            }
            lo = lo.min(nlo);
            hi = hi.max(nhi);
        }
        Ok(result.expect("at least one attempt"))
    }
}

/// One Cahn-Hilliard step with a throwaway stepper.
pub fn step_ch(state: &PhaseState, v: &FaceField, dt: f64, m: &MaterialModel, opts: &ChOptions) -> Result<PhaseState> {
    ChStepper::new(*opts).step(state, v, dt, m).map(|(s, _)| s)
}
