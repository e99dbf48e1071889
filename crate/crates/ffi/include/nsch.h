#ifndef NSCH_H
#define NSCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every entry point.
typedef enum NschStatus {
  NSCH_STATUS_OK = 0,
  NSCH_STATUS_NULL_ARGUMENT = 1,
  NSCH_STATUS_INVALID_UTF8 = 2,
  NSCH_STATUS_CONFIG = 3,
  NSCH_STATUS_SOLVER = 4,
  NSCH_STATUS_IO = 5,
  NSCH_STATUS_FORMAT = 6,
  NSCH_STATUS_BUFFER_TOO_SMALL = 7,
  NSCH_STATUS_FINISHED = 8,
  NSCH_STATUS_PANIC = 9,
} NschStatus;

// Parsed run configuration.
typedef struct NschConfig NschConfig;

// A simulation in progress.
typedef struct NschSim NschSim;

// Diagnostics of the current step.
typedef struct NschEnergyReport {
  double t;
  double e_kin;
  double e_free;
  double e_tot;
  double d_visc;
  double d_flux;
  double mass;
  double g_eps_int;
  double lap_a_sq_cum;
  double psi_ln_sq_cum;
  double phi_min;
  double phi_max;
} NschEnergyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses configuration text (`key = value` lines). Writes a new handle to `out`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum NschStatus nsch_config_from_str(const char *text, struct NschConfig **out);

// Writes a handle holding the default configuration to `out`.
//
// # Safety
// `out` must be writable.
enum NschStatus nsch_config_default(struct NschConfig **out);

// # Safety
// `cfg` must come from this library and not be freed twice. Null is ignored.
void nsch_config_free(struct NschConfig *cfg);

// Builds the initial state for `cfg`. The configuration may be freed afterwards.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum NschStatus nsch_sim_new(const struct NschConfig *cfg, struct NschSim **out);

// Advances one step. Returns `NSCH_STATUS_FINISHED` once `t_end` has been reached.
// On a solver failure the state is left at the last completed step.
//
// # Safety
// `sim` must be a live handle.
enum NschStatus nsch_sim_step(struct NschSim *sim);

// Steps until `t_end`.
//
// # Safety
// `sim` must be a live handle.
enum NschStatus nsch_sim_run(struct NschSim *sim);

// # Safety
// `sim` must be a live handle; `out` must be writable.
enum NschStatus nsch_sim_report(const struct NschSim *sim, struct NschEnergyReport *out);

// Number of completed steps.
//
// # Safety
// `sim` must be a live handle; `out` must be writable.
enum NschStatus nsch_sim_step_index(const struct NschSim *sim, uint64_t *out);

// # Safety
// `sim` must be a live handle; `nx` and `ny` must be writable.
enum NschStatus nsch_sim_grid_size(const struct NschSim *sim, size_t *nx, size_t *ny);

// Copies the cell-centred phase field, row-major with `x` fastest, into `buf`.
// `len` must be at least `nx * ny`.
//
// # Safety
// `sim` must be a live handle; `buf` must have room for `len` doubles.
enum NschStatus nsch_sim_copy_phi(const struct NschSim *sim, double *buf, size_t len);

// Writes the current fields to a binary snapshot file.
//
// # Safety
// `sim` must be a live handle; `path` a NUL-terminated string.
enum NschStatus nsch_sim_write_snapshot(const struct NschSim *sim, const char *path);

// # Safety
// `sim` must come from this library and not be freed twice. Null is ignored.
void nsch_sim_free(struct NschSim *sim);

// Message of the last failed call on this thread, empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *nsch_last_error_message(void);

const char *nsch_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NSCH_H */
