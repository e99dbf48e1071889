//! Energy, dissipation and entropy functionals along a trajectory.
//!
//! The rates `d_visc` and `d_flux` stored with step `k` are those realised by
//! the step that produced it, so the cumulative integrals and the energy
//! inequality use `sum_{k in (s, t]} (t_k - t_{k-1}) rate_k`.

use crate::error::{NschError, Result};
use crate::flow::{self, FlowState};
use crate::grid::{self, FaceField};
use crate::material::MaterialModel;
use crate::phasefield::{self, PhaseState};

/// Column names of the time series, in order.
pub const SERIES_HEADER: [&str; 12] = [
    "t", "e_kin", "e_free", "e_tot", "d_visc", "d_flux", "mass", "g_eps_int", "lapA_sq_cum", "psi_ln_sq_cum", "phi_min", "phi_max",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub t: f64,
    pub e_kin: f64,
    pub e_free: f64,
    pub e_tot: f64,
    pub d_visc: f64,
    pub d_flux: f64,
    pub mass: f64,
    pub g_eps_int: f64,
    pub lap_a_sq_cum: f64,
    pub psi_ln_sq_cum: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl EnergyReport {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.t,
            self.e_kin,
            self.e_free,
            self.e_tot,
            self.d_visc,
            self.d_flux,
            self.mass,
            self.g_eps_int,
            self.lap_a_sq_cum,
            self.psi_ln_sq_cum,
            self.phi_min,
            self.phi_max,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        EnergyReport {
            t: a[0],
            e_kin: a[1],
            e_free: a[2],
            e_tot: a[3],
            d_visc: a[4],
            d_flux: a[5],
            mass: a[6],
            g_eps_int: a[7],
            lap_a_sq_cum: a[8],
            psi_ln_sq_cum: a[9],
            phi_min: a[10],
            phi_max: a[11],
        }
    }

    /// `max(0, max |phi| - 1)`.
    pub fn overshoot(&self) -> f64 {
        (self.phi_max.abs().max(self.phi_min.abs()) - 1.0).max(0.0)
    }
}

/// Instantaneous integrands of the two cumulative columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeRates {
    pub lap_a_sq: f64,
    pub psi_ln_sq: f64,
}

/// `sum (psi_eps(phi) + |grad_h A(phi)|^2 / 2) hx hy`.
pub fn free_energy(phi: &grid::ScalarField, m: &MaterialModel) -> Result<f64> {
    let g = phi.grid;
    let ga = grid::grad_cc_to_face(&phasefield::a_field(phi, m)?);
    let bulk: f64 = phi.data.iter().map(|s| m.psi_eps(*s)).sum::<f64>() * g.cell_volume();
    Ok(bulk + 0.5 * ga.norm_sq())
}

/// `sum m_face |grad mu|^2` over faces, the mobility form of `|Jhat|^2`.
pub fn flux_dissipation_mobility_form(mob: &FaceField, mu: &grid::ScalarField) -> f64 {
    let gm = grid::grad_cc_to_face(mu);
    let s: f64 = gm.x.iter().zip(&mob.x).map(|(g, m)| m * g * g).sum::<f64>() + gm.y.iter().zip(&mob.y).map(|(g, m)| m * g * g).sum::<f64>();
    s * mu.grid.cell_volume()
}

/// Report with zero cumulative columns, plus the integrands of those columns.
pub fn instantaneous(flow: &FlowState, phase: &PhaseState, m: &MaterialModel) -> Result<(EnergyReport, CumulativeRates)> {
    let phi = &phase.phi;
    let g = phi.grid;
    let vol = g.cell_volume();
    let e_kin = flow::kinetic_energy(&flow.v, &flow.rho);
    let e_free = free_energy(phi, m)?;
    let d_visc = flow::viscous_dissipation(&flow.v, phi, m);
    let d_flux = phase.jhat.norm_sq();
    let mut g_eps = 0.0;
    for s in &phi.data {
        g_eps += m.entropy_g_eps(*s)?;
    }
    let lap = grid::laplace_neumann(&phasefield::a_field(phi, m)?);
    let lap_a_sq = lap.data.iter().map(|v| v * v).sum::<f64>() * vol;
    let psi_ln_sq = phi.data.iter().map(|s| m.psi_ln_prime_clamped(*s).powi(2)).sum::<f64>() * vol;
    let r = EnergyReport {
        t: phase.t,
        e_kin,
        e_free,
        e_tot: e_kin + e_free,
        d_visc,
        d_flux,
        mass: phi.mean(),
        g_eps_int: g_eps * vol,
        lap_a_sq_cum: 0.0,
        psi_ln_sq_cum: 0.0,
        phi_min: phi.min(),
        phi_max: phi.max(),
    };
    if !r.to_array().iter().all(|v| v.is_finite()) {
        return Err(NschError::NonFinite("energy report"));
    }
    Ok((r, CumulativeRates { lap_a_sq, psi_ln_sq }))
}

/// Report of an initial state: cumulative columns are zero.
pub fn report(flow: &FlowState, phase: &PhaseState, m: &MaterialModel) -> Result<EnergyReport> {
    instantaneous(flow, phase, m).map(|(r, _)| r)
}

/// Report of a state following `prev`, with the cumulative columns advanced
/// by `(t - prev.t)` times the new integrands.
pub fn report_after(prev: &EnergyReport, flow: &FlowState, phase: &PhaseState, m: &MaterialModel) -> Result<EnergyReport> {
    let (mut r, rates) = instantaneous(flow, phase, m)?;
    accumulate(prev, &mut r, rates);
    Ok(r)
}

pub fn accumulate(prev: &EnergyReport, next: &mut EnergyReport, rates: CumulativeRates) {
    let dt = next.t - prev.t;
    next.lap_a_sq_cum = prev.lap_a_sq_cum + dt * rates.lap_a_sq;
    next.psi_ln_sq_cum = prev.psi_ln_sq_cum + dt * rates.psi_ln_sq;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub pass: bool,
    /// `E(t) + int_s^t (d_visc + d_flux) - E(s)`; non-positive when the inequality holds.
    pub slack: f64,
}

/// Time integral of the dissipation rates on `(s, t]`.
fn dissipated(history: &[EnergyReport], s: usize, t: usize) -> f64 {
    (s + 1..=t).map(|k| (history[k].t - history[k - 1].t) * (history[k].d_visc + history[k].d_flux)).sum()
}

pub fn check_energy_inequality(history: &[EnergyReport], s: usize, t: usize, tol: f64) -> Result<InequalityCheck> {
    if s > t || t >= history.len() {
        return Err(NschError::Config(format!("invalid interval ({s}, {t}) for a history of {} reports", history.len())));
    }
    let slack = history[t].e_tot + dissipated(history, s, t) - history[s].e_tot;
    Ok(InequalityCheck { pass: slack <= tol, slack })
}

/// Largest slack over all pairs `s <= t`, with the pair attaining it.
pub fn worst_energy_slack(history: &[EnergyReport]) -> (f64, usize, usize) {
    // prefix sums of the dissipation make every pair O(1)
    let mut cum = vec![0.0; history.len()];
    for k in 1..history.len() {
        cum[k] = cum[k - 1] + (history[k].t - history[k - 1].t) * (history[k].d_visc + history[k].d_flux);
    }
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for t in 0..history.len() {
        let lhs = history[t].e_tot + cum[t];
        for s in 0..=t {
            let slack = lhs - cum[s] - history[s].e_tot;
            if slack > worst.0 {
                worst = (slack, s, t);
            }
        }
    }
    worst
}

/// The four uniform-in-eps quantities of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSummary {
    pub eps: f64,
    pub sup_e_tot: f64,
    pub lap_a_sq_cum: f64,
    pub eps3_psi_ln_sq: f64,
    pub jhat_sq_cum: f64,
}

impl SweepSummary {
    pub fn values(&self) -> [f64; 4] {
        [self.sup_e_tot, self.lap_a_sq_cum, self.eps3_psi_ln_sq, self.jhat_sq_cum]
    }
}

pub fn summarize(eps: f64, history: &[EnergyReport]) -> SweepSummary {
    let last = history.last().copied().unwrap_or_default();
    SweepSummary {
        eps,
        sup_e_tot: history.iter().map(|r| r.e_tot).fold(f64::NEG_INFINITY, f64::max),
        lap_a_sq_cum: last.lap_a_sq_cum,
        eps3_psi_ln_sq: eps.powi(3) * last.psi_ln_sq_cum,
        jhat_sq_cum: (1..history.len()).map(|k| (history[k].t - history[k - 1].t) * history[k].d_flux).sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    pub rows: Vec<SweepSummary>,
    /// Per row and quantity: within the allowed factor of the largest-eps value.
    pub within: Vec<[bool; 4]>,
    pub pass: bool,
}

pub const UNIFORM_BOUND_FACTOR: f64 = 10.0;

/// Each quantity must stay below ten times its value at the largest eps.
pub fn check_uniform_bounds(rows: &[SweepSummary]) -> Result<BoundsTable> {
    if rows.len() < 3 {
        return Err(NschError::Config(format!("uniform bounds need at least 3 eps values, got {}", rows.len())));
    }
    let reference = rows.iter().max_by(|a, b| a.eps.total_cmp(&b.eps)).expect("non-empty").values();
    let within: Vec<[bool; 4]> = rows
        .iter()
        .map(|r| {
            let v = r.values();
            std::array::from_fn(|q| v[q] <= UNIFORM_BOUND_FACTOR * reference[q])
        })
        .collect();
    let pass = within.iter().all(|w| w.iter().all(|b| *b));
    Ok(BoundsTable { rows: rows.to_vec(), within, pass })
}
