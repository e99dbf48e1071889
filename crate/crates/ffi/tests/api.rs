use std::ffi::{CStr, CString};
use std::ptr;

use nsch_ffi::*;

const CFG: &str = "grid.nx = 16\ngrid.ny = 16\ngrid.lx = 8.0\ngrid.ly = 8.0\ntime.dt = 0.01\ntime.t_end = 0.05\n";

fn last_error() -> String {
    unsafe { CStr::from_ptr(nsch_last_error_message()) }.to_string_lossy().into_owned()
}

fn new_sim(text: &str) -> *mut NschSim {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(nsch_config_from_str(text.as_ptr(), &mut cfg), NschStatus::Ok);
        assert_eq!(nsch_sim_new(cfg, &mut sim), NschStatus::Ok);
        nsch_config_free(cfg);
    }
    sim
}

#[test]
fn run_to_completion() {
    let sim = new_sim(CFG);
    let mut r0 = NschEnergyReport::default();
    let mut r1 = NschEnergyReport::default();
    let mut steps = 0u64;
    unsafe {
        nsch_sim_report(sim, &mut r0);
        assert_eq!(nsch_sim_run(sim), NschStatus::Ok);
        nsch_sim_report(sim, &mut r1);
        nsch_sim_step_index(sim, &mut steps);
        assert_eq!(nsch_sim_step(sim), NschStatus::Finished);
        nsch_sim_free(sim);
    }
    assert_eq!(steps, 5);
    assert!((r1.t - 0.05).abs() < 1e-12);
    assert!((r1.mass - r0.mass).abs() <= 1e-12);
    assert!(r1.e_tot <= r0.e_tot);
}

#[test]
fn copy_phi_checks_length() {
    let sim = new_sim(CFG);
    let (mut nx, mut ny) = (0, 0);
    unsafe {
        nsch_sim_grid_size(sim, &mut nx, &mut ny);
        let mut small = vec![0.0; nx * ny - 1];
        assert_eq!(nsch_sim_copy_phi(sim, small.as_mut_ptr(), small.len()), NschStatus::BufferTooSmall);
        assert!(last_error().contains("need 256"));
        let mut buf = vec![2.0; nx * ny];
        assert_eq!(nsch_sim_copy_phi(sim, buf.as_mut_ptr(), buf.len()), NschStatus::Ok);
        assert!(buf.iter().all(|v| v.abs() <= 1.0) && buf.iter().any(|v| *v != buf[0]));
        nsch_sim_free(sim);
    }
}

#[test]
fn config_errors() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("grid.nx = 16\nnot.a.key = 1\n").unwrap();
    unsafe {
        assert_eq!(nsch_config_from_str(bad.as_ptr(), &mut cfg), NschStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("not.a.key"));
        assert_eq!(nsch_config_from_str(ptr::null(), &mut cfg), NschStatus::NullArgument);
        let invalid = [0xffu8, 0];
        assert_eq!(nsch_config_from_str(invalid.as_ptr().cast(), &mut cfg), NschStatus::InvalidUtf8);
        assert_eq!(nsch_sim_step(ptr::null_mut()), NschStatus::NullArgument);
        nsch_sim_free(ptr::null_mut());
        nsch_config_free(ptr::null_mut());
    }
}

#[test]
fn snapshot_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.snap");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let sim = new_sim(CFG);
    unsafe {
        assert_eq!(nsch_sim_write_snapshot(sim, cpath.as_ptr()), NschStatus::Ok);
        let missing = CString::new(dir.path().join("no/such/dir/x.snap").to_str().unwrap()).unwrap();
        assert_eq!(nsch_sim_write_snapshot(sim, missing.as_ptr()), NschStatus::Io);
        nsch_sim_free(sim);
    }
    let snap = nsch_core::io::snapshot::read_file(&path).unwrap();
    assert_eq!((snap.nx, snap.ny), (16, 16));
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(nsch_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/nsch.h")).unwrap();
    for f in [
        "nsch_config_from_str",
        "nsch_config_default",
        "nsch_config_free",
        "nsch_sim_new",
        "nsch_sim_step",
        "nsch_sim_run",
        "nsch_sim_report",
        "nsch_sim_step_index",
        "nsch_sim_grid_size",
        "nsch_sim_copy_phi",
        "nsch_sim_write_snapshot",
        "nsch_sim_free",
        "nsch_last_error_message",
        "nsch_version",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct NschSim NschSim;"));
}
