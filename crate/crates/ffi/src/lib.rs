//! C ABI over `nsch-core`.
//!
//! Objects are opaque and owned by the caller once created; release them with
//! the matching `*_free`. Every call returns an [`NschStatus`]; on failure the
//! message is available from [`nsch_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nsch_core::energy::EnergyReport;
use nsch_core::io::{config, snapshot};
use nsch_core::sim::{SimConfig, Simulation};
use nsch_core::NschError;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NschStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Format = 6,
    BufferTooSmall = 7,
    Finished = 8,
    Panic = 9,
}

/// Parsed run configuration.
pub struct NschConfig(SimConfig);

/// A simulation in progress.
pub struct NschSim(Simulation);

/// Diagnostics of the current step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NschEnergyReport {
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

impl From<&EnergyReport> for NschEnergyReport {
    fn from(r: &EnergyReport) -> Self {
        NschEnergyReport {
            t: r.t,
            e_kin: r.e_kin,
            e_free: r.e_free,
            e_tot: r.e_tot,
            d_visc: r.d_visc,
            d_flux: r.d_flux,
            mass: r.mass,
            g_eps_int: r.g_eps_int,
            lap_a_sq_cum: r.lap_a_sq_cum,
            psi_ln_sq_cum: r.psi_ln_sq_cum,
            phi_min: r.phi_min,
            phi_max: r.phi_max,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &NschError) -> NschStatus {
    match e.root() {
        NschError::Config(_) | NschError::Unsupported(_) | NschError::MismatchedGrids(_) | NschError::CoefficientBelowBound { .. } => {
            NschStatus::Config
        }
        NschError::Io(_) => NschStatus::Io,
        NschError::FormatVersionMismatch(_) | NschError::CorruptSnapshot(_) | NschError::MalformedSeries(_) => NschStatus::Format,
        _ => NschStatus::Solver,
    }
}

struct Fail(NschStatus, String);

impl From<NschError> for Fail {
    fn from(e: NschError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NschStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NschStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_default()));
            NschStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(NschStatus::NullArgument, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|e| Fail(NschStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Parses configuration text (`key = value` lines). Writes a new handle to `out`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_config_from_str(text: *const c_char, out: *mut *mut NschConfig) -> NschStatus {
    guard(|| {
        let out = unsafe { borrow_mut(out, "out") }?;
        *out = std::ptr::null_mut();
        let cfg = config::parse(unsafe { c_str(text, "text") }?)?;
        *out = Box::into_raw(Box::new(NschConfig(cfg)));
        Ok(())
    })
}

/// Writes a handle holding the default configuration to `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_config_default(out: *mut *mut NschConfig) -> NschStatus {
    guard(|| {
        let out = unsafe { borrow_mut(out, "out") }?;
        *out = Box::into_raw(Box::new(NschConfig(SimConfig::default())));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsch_config_free(cfg: *mut NschConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Builds the initial state for `cfg`. The configuration may be freed afterwards.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_new(cfg: *const NschConfig, out: *mut *mut NschSim) -> NschStatus {
    guard(|| {
        let out = unsafe { borrow_mut(out, "out") }?;
        *out = std::ptr::null_mut();
        let cfg = unsafe { borrow(cfg, "config") }?;
        let sim = Simulation::new(cfg.0.clone())?;
        *out = Box::into_raw(Box::new(NschSim(sim)));
        Ok(())
    })
}

/// Advances one step. Returns `NSCH_STATUS_FINISHED` once `t_end` has been reached.
/// On a solver failure the state is left at the last completed step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_step(sim: *mut NschSim) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow_mut(sim, "sim") }?;
        if sim.0.done() {
            return Err(Fail(NschStatus::Finished, "simulation has reached t_end".into()));
        }
        sim.0.step()?;
        Ok(())
    })
}

/// Steps until `t_end`.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_run(sim: *mut NschSim) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow_mut(sim, "sim") }?;
        while !sim.0.done() {
            sim.0.step()?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_report(sim: *const NschSim, out: *mut NschEnergyReport) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow(sim, "sim") }?;
        *unsafe { borrow_mut(out, "out") }? = sim.0.report().into();
        Ok(())
    })
}

/// Number of completed steps.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_step_index(sim: *const NschSim, out: *mut u64) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow(sim, "sim") }?;
        *unsafe { borrow_mut(out, "out") }? = sim.0.step_index() as u64;
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `nx` and `ny` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_grid_size(sim: *const NschSim, nx: *mut usize, ny: *mut usize) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow(sim, "sim") }?;
        let g = sim.0.phase.grid();
        *unsafe { borrow_mut(nx, "nx") }? = g.nx;
        *unsafe { borrow_mut(ny, "ny") }? = g.ny;
        Ok(())
    })
}

/// Copies the cell-centred phase field, row-major with `x` fastest, into `buf`.
/// `len` must be at least `nx * ny`.
///
/// # Safety
/// `sim` must be a live handle; `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_copy_phi(sim: *const NschSim, buf: *mut f64, len: usize) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow(sim, "sim") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = &sim.0.phase.phi.data;
        if len < data.len() {
            return Err(Fail(NschStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", data.len())));
        }
        unsafe { std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len()) };
        Ok(())
    })
}

/// Writes the current fields to a binary snapshot file.
///
/// # Safety
/// `sim` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_write_snapshot(sim: *const NschSim, path: *const c_char) -> NschStatus {
    guard(|| {
        let sim = unsafe { borrow(sim, "sim") }?;
        let path = unsafe { c_str(path, "path") }?;
        snapshot::write_file(Path::new(path), &snapshot::from_states(&sim.0.phase, &sim.0.flow))?;
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nsch_sim_free(sim: *mut NschSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nsch_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn nsch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
