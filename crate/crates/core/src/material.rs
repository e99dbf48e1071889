//! Constitutive functions of the two-phase model.
//!
//! Everything here is a pure function of the order parameter `s`: density
//! and viscosity blends, the gradient-energy coefficient `a(s)` with its
//! antiderivative `A(s) = int_0^s sqrt(a)`, the smooth double well `psi`, the
//! logarithmic part `psi_ln`, the degenerate mobility `m(s) = 1 - s^2` and its
//! regularisation `m_eps`, and the entropy function `G_eps` with
//! `G_eps'' = sqrt(a) / m_eps`.

use std::fmt;
use std::sync::Arc;

use crate::error::{NschError, Result};
use crate::quadrature;

const QUAD_TOL: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-12;
const ENTROPY_QUAD_TOL: f64 = 1e-10;
const CLIP_CAP: f64 = 1e-9;

/// Smooth homogeneous free energy density.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
    fn second_derivative(&self, s: f64) -> f64;
}

/// `(1 - s^2)^2 / 4`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuarticWell;

impl Potential for QuarticWell {
    fn value(&self, s: f64) -> f64 {
        let t = 1.0 - s * s;
        0.25 * t * t
    }
    fn derivative(&self, s: f64) -> f64 {
        s * s * s - s
    }
    fn second_derivative(&self, s: f64) -> f64 {
        3.0 * s * s - 1.0
    }
}

/// Gradient-energy coefficient `a(s) = a0 + a1 s^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientCoefficient {
    Constant(f64),
    Quadratic { a0: f64, a1: f64 },
}

impl GradientCoefficient {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            GradientCoefficient::Constant(a) => a,
            GradientCoefficient::Quadratic { a0, a1 } => a0 + a1 * s * s,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            GradientCoefficient::Constant(_) => 0.0,
            GradientCoefficient::Quadratic { a1, .. } => 2.0 * a1 * s,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            GradientCoefficient::Constant(a) => Some(a),
            GradientCoefficient::Quadratic { .. } => None,
        }
    }

    fn min_max_on_unit(&self) -> (f64, f64) {
        match *self {
            GradientCoefficient::Constant(a) => (a, a),
            GradientCoefficient::Quadratic { a0, a1 } => (a0.min(a0 + a1), a0.max(a0 + a1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub rho1: f64,
    pub rho2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub coefficient: GradientCoefficient,
    pub eps: f64,
    /// Lower bound on `a` and `eta`; derived from the data when absent.
    pub c0: Option<f64>,
    /// Upper bound on `a` and `eta`; derived from the data when absent.
    pub k_bound: Option<f64>,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            rho1: 1.0,
            rho2: 2.0,
            eta1: 0.01,
            eta2: 0.02,
            coefficient: GradientCoefficient::Constant(1.0),
            eps: 1e-2,
            c0: None,
            k_bound: None,
        }
    }
}

/// Immutable bundle of all constitutive functions.
#[derive(Clone)]
pub struct MaterialModel {
    pub rho1: f64,
    pub rho2: f64,
    pub beta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub coefficient: GradientCoefficient,
    pub eps: f64,
    pub c0: f64,
    pub k_bound: f64,
    potential: Arc<dyn Potential>,
}

impl fmt::Debug for MaterialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaterialModel")
            .field("rho1", &self.rho1)
            .field("rho2", &self.rho2)
            .field("beta", &self.beta)
            .field("eta1", &self.eta1)
            .field("eta2", &self.eta2)
            .field("coefficient", &self.coefficient)
            .field("eps", &self.eps)
            .field("c0", &self.c0)
            .field("k_bound", &self.k_bound)
            .field("potential", &self.potential)
            .finish()
    }
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl MaterialModel {
    pub fn new(params: &MaterialParams) -> Result<Self> {
        Self::with_potential(params, Arc::new(QuarticWell))
    }

    pub fn with_potential(params: &MaterialParams, potential: Arc<dyn Potential>) -> Result<Self> {
        let p = params;
        if !(p.rho1 > 0.0 && p.rho2 > 0.0) {
            return Err(NschError::Config(format!("densities must be positive, got {} and {}", p.rho1, p.rho2)));
        }
        if !(p.eta1 > 0.0 && p.eta2 > 0.0) {
            return Err(NschError::Config(format!("viscosities must be positive, got {} and {}", p.eta1, p.eta2)));
        }
        if !(0.0..1.0).contains(&p.eps) {
            return Err(NschError::Config(format!("eps must lie in [0, 1), got {}", p.eps)));
        }
        if let GradientCoefficient::Quadratic { a1, .. } = p.coefficient {
            if a1 < 0.0 {
                return Err(NschError::Config(format!("a1 must be non-negative, got {a1}")));
            }
        }
        let (a_min, a_max) = p.coefficient.min_max_on_unit();
        let c0 = p.c0.unwrap_or_else(|| a_min.min(p.eta1).min(p.eta2));
        let k_bound = p.k_bound.unwrap_or_else(|| a_max.max(p.eta1).max(p.eta2));
        if !(c0 > 0.0) {
            return Err(NschError::Config(format!("c0 must be positive, got {c0}")));
        }
        if a_min < c0 {
            return Err(NschError::CoefficientBelowBound { s: 0.0, value: a_min, c0 });
        }
        if a_max > k_bound || p.eta1.max(p.eta2) > k_bound || p.eta1.min(p.eta2) < c0 {
            return Err(NschError::Config(format!(
                "bounds violated: need {c0} <= a, eta <= {k_bound} on [-1, 1]"
            )));
        }
        Ok(MaterialModel {
            rho1: p.rho1,
            rho2: p.rho2,
            beta: 0.5 * (p.rho2 - p.rho1),
            eta1: p.eta1,
            eta2: p.eta2,
            coefficient: p.coefficient,
            eps: p.eps,
            c0,
            k_bound,
            potential,
        })
    }

    /// Same model with a different regularisation parameter.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(NschError::Config(format!("eps must lie in [0, 1), got {eps}")));
        }
        let mut m = self.clone();
        m.eps = eps;
        Ok(m)
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    // ---- density and viscosity ----

    /// Affine density blend, evaluated at `s` clamped to `[-1, 1]`.
    pub fn density(&self, s: f64) -> f64 {
        let s = s.clamp(-1.0, 1.0);
        0.5 * (self.rho1 + self.rho2) + self.beta * s
    }

    pub fn viscosity(&self, s: f64) -> f64 {
        let s = s.clamp(-1.0, 1.0);
        0.5 * self.eta1 * (1.0 - s) + 0.5 * self.eta2 * (1.0 + s)
    }

    // ---- mobility ----

    pub fn mobility(s: f64) -> f64 {
        if s.abs() <= 1.0 {
            1.0 - s * s
        } else {
            0.0
        }
    }

    /// Mobility frozen at `m(1 - eps)` outside `|s| < 1 - eps`.
    pub fn mobility_eps(&self, s: f64) -> f64 {
        let edge = 1.0 - self.eps;
        if s <= -edge {
            Self::mobility(-edge)
        } else if s >= edge {
            Self::mobility(edge)
        } else {
            Self::mobility(s)
        }
    }

    /// `eps (2 - eps)`, the value of `m_eps` on the saturated set.
    pub fn mobility_floor(&self) -> f64 {
        self.eps * (2.0 - self.eps)
    }

    // ---- potentials ----

    pub fn psi(&self, s: f64) -> f64 {
        self.potential.value(s)
    }
    pub fn psi_prime(&self, s: f64) -> f64 {
        self.potential.derivative(s)
    }
    pub fn psi_second(&self, s: f64) -> f64 {
        self.potential.second_derivative(s)
    }

    /// `(1+s) ln(1+s) + (1-s) ln(1-s)`, continuously extended to `|s| = 1`
    /// and held at `2 ln 2` beyond.
    pub fn psi_ln(s: f64) -> f64 {
        let s = s.clamp(-1.0, 1.0);
        xlnx(1.0 + s) + xlnx(1.0 - s)
    }

    pub fn psi_ln_prime(s: f64) -> Result<f64> {
        if s.abs() >= 1.0 || s.is_nan() {
            return Err(NschError::SingularArgument(s));
        }
        Ok((1.0 + s).ln() - (1.0 - s).ln())
    }

    pub fn psi_ln_second(s: f64) -> Result<f64> {
        if s.abs() >= 1.0 || s.is_nan() {
            return Err(NschError::SingularArgument(s));
        }
        Ok(2.0 / (1.0 - s * s))
    }

    pub fn psi_eps(&self, s: f64) -> f64 {
        self.psi(s) + self.eps * Self::psi_ln(s)
    }

    pub fn psi_eps_prime(&self, s: f64) -> Result<f64> {
        if self.eps == 0.0 {
            return Ok(self.psi_prime(s));
        }
        Ok(self.psi_prime(s) + self.eps * Self::psi_ln_prime(s)?)
    }

    pub fn psi_eps_second(&self, s: f64) -> Result<f64> {
        if self.eps == 0.0 {
            return Ok(self.psi_second(s));
        }
        Ok(self.psi_second(s) + self.eps * Self::psi_ln_second(s)?)
    }

    /// Distance from `+-1` at which singular terms are evaluated:
    /// `min(eps / 2, 1e-9)`, or `1e-9` when `eps = 0`.
    pub fn delta_clip(&self) -> f64 {
        if self.eps > 0.0 {
            (0.5 * self.eps).min(CLIP_CAP)
        } else {
            CLIP_CAP
        }
    }

    pub fn clamp_singular(&self, s: f64) -> f64 {
        let b = 1.0 - self.delta_clip();
        s.clamp(-b, b)
    }

    /// `psi_eps'` at the clamped argument; never fails for finite `s`.
    pub fn psi_eps_prime_clamped(&self, s: f64) -> f64 {
        if self.eps == 0.0 {
            return self.psi_prime(s);
        }
        let c = self.clamp_singular(s);
        self.psi_prime(s) + self.eps * ((1.0 + c).ln() - (1.0 - c).ln())
    }

    /// `psi_ln'` at the clamped argument, as used by the diagnostics.
    pub fn psi_ln_prime_clamped(&self, s: f64) -> f64 {
        let c = self.clamp_singular(s);
        (1.0 + c).ln() - (1.0 - c).ln()
    }

    /// `psi_eps''` at the clamped argument.
    pub fn psi_eps_second_clamped(&self, s: f64) -> f64 {
        if self.eps == 0.0 {
            return self.psi_second(s);
        }
        let c = self.clamp_singular(s);
        self.psi_second(s) + self.eps * 2.0 / (1.0 - c * c)
    }

    /// `max |psi_eps''|` over `[lo, hi]` intersected with the clipped interval.
    pub fn max_abs_psi_eps_second(&self, lo: f64, hi: f64) -> f64 {
        let b = 1.0 - self.delta_clip();
        let lo = lo.clamp(-b, b);
        let hi = hi.clamp(-b, b);
        if hi < lo {
            return 0.0;
        }
        const SAMPLES: usize = 256;
        let mut m: f64 = 0.0;
        for k in 0..=SAMPLES {
            let s = lo + (hi - lo) * k as f64 / SAMPLES as f64;
            m = m.max(self.psi_eps_second_clamped(s).abs());
        }
        if lo < 0.0 && hi > 0.0 {
            m = m.max(self.psi_eps_second_clamped(0.0).abs());
        }
        m
    }

    /// Sampled lower bound of `psi_eps''` on the clipped interval.
    pub fn kappa(&self) -> f64 {
        let b = 1.0 - self.delta_clip();
        (0..=2000)
            .map(|k| -b + 2.0 * b * k as f64 / 2000.0)
            .map(|s| self.psi_eps_second_clamped(s))
            .fold(f64::INFINITY, f64::min)
    }

    // ---- gradient coefficient and its antiderivative ----

    pub fn coef_a(&self, s: f64) -> f64 {
        self.coefficient.value(s)
    }

    pub fn coef_a_prime(&self, s: f64) -> f64 {
        self.coefficient.derivative(s)
    }

    pub fn sqrt_a(&self, s: f64) -> f64 {
        self.coef_a(s).sqrt()
    }

    fn checked_sqrt_a(&self, s: f64) -> Result<f64> {
        let a = self.coef_a(s);
        if a < self.c0 {
            return Err(NschError::CoefficientBelowBound { s, value: a, c0: self.c0 });
        }
        Ok(a.sqrt())
    }

    /// `A(s) = int_0^s sqrt(a(t)) dt`.
    pub fn a_of(&self, s: f64) -> Result<f64> {
        match self.coefficient {
            GradientCoefficient::Constant(a) => {
                if a < self.c0 {
                    return Err(NschError::CoefficientBelowBound { s, value: a, c0: self.c0 });
                }
                Ok(a.sqrt() * s)
            }
            GradientCoefficient::Quadratic { .. } => {
                let mut bad = None;
                let v = quadrature::integrate(
                    |t| match self.checked_sqrt_a(t) {
                        Ok(v) => v,
                        Err(e) => {
                            bad.get_or_insert(e);
                            f64::NAN
                        }
                    },
                    0.0,
                    s,
                    QUAD_TOL,
                );
                if let Some(e) = bad {
                    return Err(e);
                }
                v.map_err(|_| NschError::NonFinite("quadrature of sqrt(a)"))
            }
        }
    }

    /// Inverse of `A` by safeguarded Newton iteration.
    pub fn a_inv(&self, r: f64) -> Result<f64> {
        if let GradientCoefficient::Constant(a) = self.coefficient {
            return Ok(r / a.sqrt());
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        // |A(s)| >= sqrt(c0) |s| brackets the root
        let bound = r.abs() / self.c0.sqrt();
        let (mut lo, mut hi) = if r > 0.0 { (0.0, bound) } else { (-bound, 0.0) };
        let mut s = r / self.sqrt_a(0.0);
        s = s.clamp(lo, hi);
        for _ in 0..200 {
            let f = self.a_of(s)? - r;
            if f.abs() <= NEWTON_TOL * r.abs().max(1.0) {
                return Ok(s);
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - f / self.checked_sqrt_a(s)?;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= f64::EPSILON * s.abs().max(1.0) {
                return Ok(next);
            }
            s = next;
        }
        Err(NschError::NonConvergence { iterations: 200, residual: (self.a_of(s)? - r).abs() })
    }

    /// Derivative of the reparametrised potential, `psi_eps'(A^-1(r)) / sqrt(a(A^-1(r)))`,
    /// with the singular part evaluated at the clamped argument.
    pub fn psi_tilde_eps_prime(&self, r: f64) -> Result<f64> {
        let s = self.a_inv(r)?;
        Ok(self.psi_eps_prime_clamped(s) / self.checked_sqrt_a(s)?)
    }

    // ---- entropy ----

    /// `G_eps` with `G_eps(0) = G_eps'(0) = 0` and `G_eps'' = sqrt(a) / m_eps`.
    /// Defined for every real `s` since `m_eps` is bounded below.
    pub fn entropy_g_eps(&self, s: f64) -> Result<f64> {
        if self.eps == 0.0 {
            return self.entropy_g(s);
        }
        match self.coefficient {
            GradientCoefficient::Constant(a) => Ok(a.sqrt() * self.g_eps_unit(s)),
            GradientCoefficient::Quadratic { .. } => {
                let v = quadrature::integrate(|t| (s - t) * self.sqrt_a(t) / self.mobility_eps(t), 0.0, s, ENTROPY_QUAD_TOL);
                v.map_err(|_| NschError::NonFinite("entropy quadrature"))
            }
        }
    }

    /// Closed form of `G_eps` for `a = 1`.
    fn g_eps_unit(&self, s: f64) -> f64 {
        let edge = 1.0 - self.eps;
        let x = s.abs();
        if x <= edge {
            0.5 * Self::psi_ln(x)
        } else {
            let d = x - edge;
            let slope = 0.5 * ((1.0 + edge).ln() - (1.0 - edge).ln());
            0.5 * Self::psi_ln(edge) + slope * d + 0.5 * d * d / self.mobility_floor()
        }
    }

    /// `G` built from the degenerate mobility, continuous on `[-1, 1]`.
    pub fn entropy_g(&self, s: f64) -> Result<f64> {
        if s.abs() > 1.0 || s.is_nan() {
            return Err(NschError::SingularArgument(s));
        }
        match self.coefficient {
            GradientCoefficient::Constant(a) => Ok(a.sqrt() * 0.5 * Self::psi_ln(s)),
            GradientCoefficient::Quadratic { .. } => {
                // (s - t) / (1 - t^2) stays bounded as |s| -> 1
                let v = quadrature::integrate(
                    |t| (s - t) * self.sqrt_a(t) / ((1.0 - t) * (1.0 + t)),
                    0.0,
                    s,
                    ENTROPY_QUAD_TOL,
                );
                v.map_err(|_| NschError::SingularArgument(s))
            }
        }
    }

    /// Constants `(C, c)` with `psi_ln'(s) (s - mean) >= C |psi_ln'(s)| - c` for
    /// `s` in `(-1, 1)` and `mean` in `(-1 + alpha, 1 - alpha)`.
    pub fn log_coercivity_constants(mean: f64, alpha: f64) -> Result<(f64, f64)> {
        if !(alpha > 0.0 && alpha < 1.0) || mean.abs() >= 1.0 - alpha {
            return Err(NschError::Config(format!("mean {mean} not inside (-1 + {alpha}, 1 - {alpha})")));
        }
        let c_big = 0.5 * alpha;
        let edge = Self::psi_ln_prime(1.0 - 0.5 * alpha)?;
        Ok((c_big, edge * (c_big + 2.0)))
    }
}
