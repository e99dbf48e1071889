//! Time loop, initial data, eps sweeps and checkpoints.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{self, BoundsTable, EnergyReport, SweepSummary};
use crate::error::{NschError, Result};
use crate::flow::{self, FlowOptions, FlowState};
use crate::grid::{self, FaceField, Grid, PoissonOptions, ScalarField};
use crate::io::{series, snapshot};
use crate::material::{MaterialModel, MaterialParams};
use crate::phasefield::{ChOptions, ChStepInfo, ChStepper, PhaseState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 64, ny: 64, lx: 1.0, ly: 1.0 }
    }
}

/// Profiles use `tanh(d / (sqrt(2) width))` with `d` the signed distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPhase {
    /// `mean` plus seeded uniform noise of the given amplitude, shifted to the exact mean.
    Random { mean: f64, amplitude: f64 },
    /// Interface at `x = center`, `phi > 0` on the right.
    Stripe { center: f64, width: f64 },
    /// Centred disk with `phi > 0` inside.
    Disk { radius: f64, width: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialVelocity {
    Zero,
    /// Seeded combination of the lowest 3 x 3 stream-function modes.
    Random { amplitude: f64 },
    /// Single-cell vortex from the lowest stream-function mode.
    Vortex { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub phase: InitialPhase,
    pub velocity: InitialVelocity,
    pub seed: u64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition {
            phase: InitialPhase::Disk { radius: 0.25, width: 0.02 },
            velocity: InitialVelocity::Zero,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOrder {
    ChFirst,
    FlowFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub material: MaterialParams,
    pub dt: f64,
    pub t_end: f64,
    pub ch: ChOptions,
    pub flow: FlowOptions,
    /// When false the velocity stays zero and only the phase field evolves.
    pub flow_enabled: bool,
    pub split_order: SplitOrder,
    pub init: InitialCondition,
    pub sweep_eps: Vec<f64>,
    /// Snapshot cadence in steps; 0 keeps only the first and last state.
    pub snap_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid: GridConfig::default(),
            material: MaterialParams::default(),
            dt: 1e-4,
            t_end: 0.05,
            ch: ChOptions::default(),
            flow: FlowOptions::default(),
            flow_enabled: true,
            split_order: SplitOrder::ChFirst,
            init: InitialCondition::default(),
            sweep_eps: vec![1e-1, 3e-2, 1e-2, 3e-3],
            snap_every: 10,
        }
    }
}

impl SimConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn model(&self) -> Result<MaterialModel> {
        MaterialModel::new(&self.material)
    }

    pub fn validate(&self) -> Result<()> {
        self.build_grid()?;
        self.model()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NschError::Config(format!("time.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(NschError::Config(format!("time.t_end must be positive, got {}", self.t_end)));
        }
        if !(self.ch.tol > 0.0 && self.flow.pressure_tol > 0.0 && self.flow.viscous_tol > 0.0) {
            return Err(NschError::Config("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        let e = &self.sweep_eps;
        if e.len() < 3 {
            return Err(NschError::Config(format!("sweep.eps needs at least 3 values, got {}", e.len())));
        }
        if e.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(NschError::Config("sweep.eps values must lie in (0, 1)".into()));
        }
        if e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(NschError::Config("sweep.eps must be strictly decreasing".into()));
        }
        Ok(())
    }

    /// Number of steps: `floor(t_end / dt)` up to round-off.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    pub fn with_eps(&self, eps: f64) -> SimConfig {
        let mut c = self.clone();
        c.material.eps = eps;
        c
    }

    fn is_snapshot_step(&self, step: usize) -> bool {
        step == 0 || step == self.steps() || (self.snap_every > 0 && step % self.snap_every == 0)
    }
}

pub fn initial_phase(g: Grid, init: &InitialCondition) -> ScalarField {
    let profile = |d: f64, w: f64| (d / (std::f64::consts::SQRT_2 * w)).tanh();
    match init.phase {
        InitialPhase::Random { mean, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
            let mut noise: Vec<f64> = (0..g.cells()).map(|_| amplitude * rng.gen_range(-1.0..1.0)).collect();
            let shift = noise.iter().sum::<f64>() / noise.len() as f64;
            noise.iter_mut().for_each(|v| *v += mean - shift);
            ScalarField { grid: g, data: noise }
        }
        InitialPhase::Stripe { center, width } => ScalarField::from_fn(g, |x, _| profile(x - center, width)),
        InitialPhase::Disk { radius, width } => {
            let (cx, cy) = (0.5 * g.lx, 0.5 * g.ly);
            ScalarField::from_fn(g, |x, y| profile(radius - ((x - cx).powi(2) + (y - cy).powi(2)).sqrt(), width))
        }
        InitialPhase::Constant { value } => ScalarField::constant(g, value),
    }
}

/// Discrete curl of a nodal stream function that vanishes on the walls, so
/// the result is exactly solenoidal with zero normal flux.
fn curl_of_nodes(g: Grid, psi: impl Fn(f64, f64) -> f64) -> FaceField {
    let node = |i: usize, j: usize| {
        if i == 0 || j == 0 || i == g.nx || j == g.ny {
            0.0
        } else {
            psi(i as f64 * g.hx, j as f64 * g.hy)
        }
    };
    let mut v = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            v.x[g.xface(i, j)] = (node(i, j + 1) - node(i, j)) / g.hy;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            v.y[g.yface(i, j)] = -(node(i + 1, j) - node(i, j)) / g.hx;
        }
    }
    v
}

pub fn initial_velocity(g: Grid, init: &InitialCondition) -> FaceField {
    use std::f64::consts::PI;
    let (v, amplitude) = match init.velocity {
        InitialVelocity::Zero => return FaceField::zeros(g),
        InitialVelocity::Vortex { amplitude } => (curl_of_nodes(g, |x, y| (PI * x / g.lx).sin() * (PI * y / g.ly).sin()), amplitude),
        InitialVelocity::Random { amplitude } => {
            // separate stream from the phase noise
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed ^ 0x5eed_0f_f10e);
            let c: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let psi = |x: f64, y: f64| {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += c[3 * k + l] * ((k + 1) as f64 * PI * x / g.lx).sin() * ((l + 1) as f64 * PI * y / g.ly).sin();
                    }
                }
                s
            };
            (curl_of_nodes(g, psi), amplitude)
        }
    };
    let vmax = v.max_abs();
    if vmax == 0.0 {
        v
    } else {
        v.scaled(amplitude / vmax)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub phase: PhaseState,
    pub flow: FlowState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// One report per step, starting with the initial state.
    pub reports: Vec<EnergyReport>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn last_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Failure of a run, with everything computed before it.
#[derive(Debug)]
pub struct RunError {
    pub error: NschError,
    pub partial: Trajectory,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} reports)", self.error, self.partial.reports.len())
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Stepper that owns the coupled state.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    model: MaterialModel,
    pub phase: PhaseState,
    pub flow: FlowState,
    step: usize,
    report: EnergyReport,
    ch: ChStepper,
    saturated: bool,
    last_info: Option<ChStepInfo>,
}

fn is_saturated(phi: &ScalarField) -> bool {
    let first = phi.data[0];
    first.abs() == 1.0 && phi.data.iter().all(|v| *v == first)
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.build_grid()?;
        let model = cfg.model()?;
        let phi = initial_phase(g, &cfg.init);
        let phase = PhaseState::new(phi, &model)?;
        let mut flow = FlowState::at_rest(&phase.phi, &model);
        let v0 = initial_velocity(g, &cfg.init);
        if v0.max_abs() > 0.0 {
            let popts = PoissonOptions { tol: cfg.flow.pressure_tol, max_iter: cfg.flow.max_iter, ..Default::default() };
            let (v, _, _) = flow::project_with(&v0, &flow.rho, 1.0, None, popts)?;
            flow.v = v;
        }
        let report = energy::report(&flow, &phase, &model)?;
        Self::assemble(cfg, model, phase, flow, 0, report)
    }

    fn assemble(cfg: SimConfig, model: MaterialModel, phase: PhaseState, flow: FlowState, step: usize, report: EnergyReport) -> Result<Self> {
        let saturated = is_saturated(&phase.phi);
        let ch = ChStepper::new(cfg.ch);
        Ok(Simulation { cfg, model, phase, flow, step, report, ch, saturated, last_info: None })
    }

    /// Continues from a stored state and its report.
    pub fn from_state(cfg: SimConfig, phase: PhaseState, flow: FlowState, step: usize, report: EnergyReport) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.build_grid()?;
        if phase.grid() != g || flow.grid() != g {
            return Err(NschError::MismatchedGrids("stored state does not match the configured grid".into()));
        }
        let model = cfg.model()?;
        Self::assemble(cfg, model, phase, flow, step, report)
    }

    /// Continues a trajectory whose last snapshot is its final state.
    pub fn resume(cfg: SimConfig, traj: &Trajectory) -> Result<Self> {
        let snap = traj.last_snapshot().ok_or_else(|| NschError::Config("trajectory has no snapshot".into()))?;
        if snap.step + 1 != traj.reports.len() {
            return Err(NschError::Config(format!(
                "last snapshot is step {} but the series ends at step {}",
                snap.step,
                traj.reports.len().saturating_sub(1)
            )));
        }
        Self::from_state(cfg, snap.phase.clone(), snap.flow.clone(), snap.step, traj.reports[snap.step])
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }
    pub fn model(&self) -> &MaterialModel {
        &self.model
    }
    pub fn step_index(&self) -> usize {
        self.step
    }
    pub fn time(&self) -> f64 {
        self.report.t
    }
    pub fn report(&self) -> &EnergyReport {
        &self.report
    }
    pub fn total_steps(&self) -> usize {
        self.cfg.steps()
    }
    pub fn done(&self) -> bool {
        self.step >= self.cfg.steps()
    }
    /// Whether the initial phase was a pure phase, so the phase equation is skipped.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }
    pub fn last_ch_info(&self) -> Option<ChStepInfo> {
        self.last_info
    }
    pub fn is_snapshot_step(&self) -> bool {
        self.cfg.is_snapshot_step(self.step)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { step: self.step, phase: self.phase.clone(), flow: self.flow.clone() }
    }

    fn advance_phase(&mut self, phase: &PhaseState, v: &FaceField, t: f64) -> Result<PhaseState> {
        if self.saturated {
            let mut p = phase.clone();
            p.t = t;
            return Ok(p);
        }
        let (mut p, info) = self.ch.step(phase, v, self.cfg.dt, &self.model)?;
        p.t = t;
        self.last_info = Some(info);
        Ok(p)
    }

    fn advance_flow(&self, flow: &FlowState, phase: &PhaseState, t: f64) -> Result<FlowState> {
        let mut f = if self.cfg.flow_enabled {
            flow::step_ns(flow, phase, self.cfg.dt, &self.model, &self.cfg.flow)?
        } else {
            let mut f = flow.clone();
            f.rho = phase.phi.map(|s| self.model.density(s));
            f
        };
        f.t = t;
        Ok(f)
    }

    fn try_step(&mut self) -> Result<()> {
        let t = (self.step + 1) as f64 * self.cfg.dt;
        let (phase, flow) = match self.cfg.split_order {
            SplitOrder::ChFirst => {
                let p = self.advance_phase(&self.phase.clone(), &self.flow.v.clone(), t)?;
                let f = self.advance_flow(&self.flow, &p, t)?;
                (p, f)
            }
            SplitOrder::FlowFirst => {
                let f = self.advance_flow(&self.flow, &self.phase, t)?;
                let p = self.advance_phase(&self.phase.clone(), &f.v, t)?;
                let mut f = f;
                f.rho = p.phi.map(|s| self.model.density(s));
                (p, f)
            }
        };
        let report = energy::report_after(&self.report, &flow, &phase, &self.model)?;
        self.phase = phase;
        self.flow = flow;
        self.report = report;
        self.step += 1;
        Ok(())
    }

    /// Advances one step. On failure the state is left unchanged and the
    /// error carries the index of the step that failed.
    pub fn step(&mut self) -> Result<&EnergyReport> {
        let step = self.step + 1;
        self.try_step().map_err(|e| NschError::AtStep { step, source: Box::new(e) })?;
        Ok(&self.report)
    }
}

/// Runs a configuration to `t_end`.
pub fn run(cfg: &SimConfig) -> std::result::Result<Trajectory, Box<RunError>> {
    let sim = Simulation::new(cfg.clone()).map_err(|error| Box::new(RunError { error, partial: Trajectory::default() }))?;
    run_from(sim, Trajectory::default())
}

/// Steps an existing simulation to its end, appending to `traj`.
pub fn run_from(mut sim: Simulation, mut traj: Trajectory) -> std::result::Result<Trajectory, Box<RunError>> {
    if traj.reports.is_empty() {
        traj.reports.push(*sim.report());
        traj.snapshots.push(sim.snapshot());
    }
    while !sim.done() {
        if let Err(error) = sim.step() {
            return Err(Box::new(RunError { error, partial: traj }));
        }
        traj.reports.push(*sim.report());
        if sim.is_snapshot_step() {
            traj.snapshots.push(sim.snapshot());
        }
    }
    Ok(traj)
}

/// Piecewise-constant-in-time `L^2(Q_T)` distances of `phi` and `grad_h A(phi)`
/// between two trajectories with identical snapshot times.
pub fn l2_distances(a: &Trajectory, b: &Trajectory, m: &MaterialModel, t_end: f64) -> Result<(f64, f64)> {
    if a.snapshots.len() != b.snapshots.len() || a.snapshots.iter().zip(&b.snapshots).any(|(x, y)| x.step != y.step) {
        return Err(NschError::MismatchedGrids("trajectories have different snapshot times".into()));
    }
    let (mut dphi, mut dgrad) = (0.0, 0.0);
    let n = a.snapshots.len();
    for k in 0..n {
        let (sa, sb) = (&a.snapshots[k], &b.snapshots[k]);
        let t0 = sa.phase.t;
        let t1 = if k + 1 < n { a.snapshots[k + 1].phase.t } else { t_end.max(t0) };
        let w = t1 - t0;
        if w <= 0.0 {
            continue;
        }
        let g = sa.phase.grid();
        let diff: f64 = sa.phase.phi.data.iter().zip(&sb.phase.phi.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * g.cell_volume();
        let ga = grid::grad_cc_to_face(&crate::phasefield::a_field(&sa.phase.phi, m)?);
        let gb = grid::grad_cc_to_face(&crate::phasefield::a_field(&sb.phase.phi, m)?);
        let mut d = ga;
        d.axpy(-1.0, &gb);
        dphi += w * diff;
        dgrad += w * d.norm_sq();
    }
    Ok((dphi.sqrt(), dgrad.sqrt()))
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub eps: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub summaries: Vec<SweepSummary>,
    /// Distance to the previous eps in the list; `None` for the first.
    pub dist_phi: Vec<Option<f64>>,
    pub dist_grad_a: Vec<Option<f64>>,
    pub bounds: BoundsTable,
    /// Whether consecutive `phi` distances are non-increasing.
    pub cauchy_trend: bool,
}

/// Worker count from `NSCH_THREADS`; defaults to one.
pub fn thread_count() -> usize {
    std::env::var("NSCH_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|n| *n > 0).unwrap_or(1)
}

pub fn sweep_eps(cfg: &SimConfig) -> Result<SweepResult> {
    cfg.validate_sweep()?;
    sweep_configs(&cfg.sweep_eps.iter().map(|e| cfg.with_eps(*e)).collect::<Vec<_>>())
}

/// Runs configurations that differ only in `eps`, in parallel, and compares them.
pub fn sweep_configs(cfgs: &[SimConfig]) -> Result<SweepResult> {
    let first = cfgs.first().ok_or_else(|| NschError::Config("empty sweep".into()))?;
    for c in cfgs {
        let mut probe = c.clone();
        probe.material.eps = first.material.eps;
        probe.sweep_eps = first.sweep_eps.clone();
        if probe != *first {
            return Err(NschError::MismatchedGrids(format!("configuration for eps = {} differs in more than eps", c.material.eps)));
        }
        c.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| NschError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Trajectory>> = pool.install(|| cfgs.par_iter().map(|c| run(c).map_err(|e| e.error)).collect());
    let mut runs = Vec::with_capacity(cfgs.len());
    for (c, r) in cfgs.iter().zip(results) {
        runs.push(SweepRun { eps: c.material.eps, trajectory: r? });
    }
    let model = first.model()?;
    let mut dist_phi = vec![None];
    let mut dist_grad_a = vec![None];
    for w in runs.windows(2) {
        let (dp, dg) = l2_distances(&w[0].trajectory, &w[1].trajectory, &model, first.steps() as f64 * first.dt)?;
        dist_phi.push(Some(dp));
        dist_grad_a.push(Some(dg));
    }
    let summaries: Vec<SweepSummary> = runs.iter().map(|r| energy::summarize(r.eps, &r.trajectory.reports)).collect();
    let bounds = energy::check_uniform_bounds(&summaries)?;
    let d: Vec<f64> = dist_phi.iter().flatten().copied().collect();
    let cauchy_trend = d.windows(2).all(|w| w[1] <= w[0]);
    Ok(SweepResult { runs, summaries, dist_phi, dist_grad_a, bounds, cauchy_trend })
}

pub fn snapshot_path(dir: &Path, step: usize) -> std::path::PathBuf {
    dir.join(format!("fields_{step:06}.snap"))
}

/// Writes `series.csv` and one snapshot file per stored state.
pub fn checkpoint(traj: &Trajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    series::write_series(&dir.join("series.csv"), &traj.reports)?;
    for s in &traj.snapshots {
        snapshot::write_file(&snapshot_path(dir, s.step), &snapshot::from_states(&s.phase, &s.flow))?;
    }
    Ok(())
}

/// Reads back what [`checkpoint`] wrote; the grid lengths come from `grid`.
pub fn restore(dir: &Path, grid: &GridConfig) -> Result<Trajectory> {
    let reports = series::read_series(&dir.join("series.csv"))?;
    let g = Grid::new(grid.nx, grid.ny, grid.lx, grid.ly)?;
    let mut snaps = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(step) = name.strip_prefix("fields_").and_then(|s| s.strip_suffix(".snap")).and_then(|s| s.parse::<usize>().ok()) {
            let t = reports
                .get(step)
                .ok_or_else(|| NschError::CorruptSnapshot(format!("{name} has no matching row in series.csv")))?
                .t;
            let (phase, flow) = snapshot::to_states(&snapshot::read_file(&path)?, g, t)?;
            snaps.push(Snapshot { step, phase, flow });
        }
    }
    snaps.sort_by_key(|s| s.step);
    Ok(Trajectory { reports, snapshots: snaps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            grid: GridConfig { nx: 12, ny: 12, lx: 12.0, ly: 12.0 },
            dt: 1e-2,
            t_end: 0.1,
            init: InitialCondition { phase: InitialPhase::Disk { radius: 3.0, width: 1.0 }, velocity: InitialVelocity::Vortex { amplitude: 0.2 }, seed: 1 },
            snap_every: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_steps_keep_initial_state() {
        let cfg = SimConfig { t_end: 0.5e-2, ..small() };
        let traj = run(&cfg).unwrap();
        assert_eq!(traj.reports.len(), 1);
        assert_eq!(traj.snapshots.len(), 1);
    }

    #[test]
    fn run_is_deterministic() {
        let a = run(&small()).unwrap();
        let b = run(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reports.len(), 11);
        assert_eq!(a.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 2, 4, 6, 8, 10]);
    }

    #[test]
    fn initial_velocity_is_solenoidal() {
        let g = Grid::new(10, 8, 1.0, 0.8).unwrap();
        for velocity in [InitialVelocity::Random { amplitude: 0.5 }, InitialVelocity::Vortex { amplitude: 1.0 }] {
            let v = initial_velocity(g, &InitialCondition { velocity, ..Default::default() });
            assert!(grid::div_face_to_cc(&v).max_abs() < 1e-12 * v.max_abs() / g.h_min());
            assert_eq!(v.boundary_normal_max(), 0.0);
        }
    }

    #[test]
    fn random_phase_has_exact_mean() {
        let g = Grid::new(16, 16, 1.0, 1.0).unwrap();
        let init = InitialCondition { phase: InitialPhase::Random { mean: 0.1, amplitude: 0.3 }, ..Default::default() };
        assert!((initial_phase(g, &init).mean() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn saturated_start_skips_phase_equation() {
        let cfg = SimConfig {
            init: InitialCondition { phase: InitialPhase::Constant { value: 1.0 }, ..small().init },
            ..small()
        };
        let sim = Simulation::new(cfg.clone()).unwrap();
        assert!(sim.is_saturated());
        let traj = run(&cfg).unwrap();
        for s in &traj.snapshots {
            assert!(s.phase.phi.data.iter().all(|v| *v == 1.0));
            assert_eq!(s.phase.j.max_abs(), 0.0);
        }
    }

    #[test]
    fn failure_reports_step_and_partial_output() {
        let cfg = SimConfig {
            ch: ChOptions { scheme: crate::phasefield::ChScheme::Explicit, ..Default::default() },
            dt: 1.0,
            t_end: 3.0,
            init: InitialCondition { velocity: InitialVelocity::Zero, ..small().init },
            ..small()
        };
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err.error, NschError::AtStep { step: 1, .. }));
        assert_eq!(err.partial.reports.len(), 1);
    }

    #[test]
    fn mismatched_sweep_rejected() {
        let a = small();
        let mut b = small().with_eps(0.05);
        b.dt = 2e-2;
        let err = sweep_configs(&[a, b]).unwrap_err();
        assert!(matches!(err, NschError::MismatchedGrids(_)));
    }

    #[test]
    fn sweep_list_validation() {
        let mut c = small();
        c.sweep_eps = vec![0.1, 0.2, 0.05];
        assert!(c.validate_sweep().is_err());
        c.sweep_eps = vec![0.1, 0.05];
        assert!(c.validate_sweep().is_err());
        c.sweep_eps = vec![0.1, 0.05, 0.01];
        assert!(c.validate_sweep().is_ok());
    }
}
