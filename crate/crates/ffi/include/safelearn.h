#ifndef SAFELEARN_H
#define SAFELEARN_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = -1,
  SL_STATUS_INVALID_ARGUMENT = -2,
  SL_STATUS_DIMENSION = -3,
  /**
   * The datapoint contradicts the evidence; nothing was changed.
   */
  SL_STATUS_INCONSISTENT = -4,
  /**
   * The datapoint was kept but the sweeps stopped before a fixpoint.
   */
  SL_STATUS_NON_TERMINATION = -5,
  SL_STATUS_PARSE = -6,
  SL_STATUS_VALIDATION = -7,
  SL_STATUS_SIMULATION = -8,
  SL_STATUS_IO = -9,
  SL_STATUS_BUFFER_TOO_SMALL = -10,
  SL_STATUS_PANIC = -99,
} SlStatus;

/**
 * Evidence set over `n` dynamic rows and `m` inputs.
 */
typedef struct SlEvidence SlEvidence;

/**
 * The outcome of a closed-loop run.
 */
typedef struct SlRun SlRun;

/**
 * A validated scenario.
 */
typedef struct SlScenario SlScenario;

typedef struct SlSummary {
  size_t steps;
  size_t measurements;
  double min_h;
  double min_h_v;
  double max_e2;
  size_t max_j;
  size_t drops;
  size_t restores;
  size_t violations;
  bool safe;
} SlSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sl_last_error(char *buf, size_t len);

/**
 * Creates evidence holding only the `[-M, M]` prior anchored at `anchor`
 * (length `2n`). `f_bar` has `n` entries, `g_bar` is row-major `n × m`.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths; `out` must be valid.
 */
enum SlStatus sl_evidence_new(size_t n,
                              size_t m,
                              const double *f_bar,
                              const double *g_bar,
                              double prior_magnitude,
                              const double *anchor,
                              struct SlEvidence **out);

/**
 * # Safety
 * `ev` must be null or a handle from [`sl_evidence_new`] not yet freed.
 */
void sl_evidence_free(struct SlEvidence *ev);

/**
 * Number of entries including the prior.
 *
 * # Safety
 * `ev` must be a live handle or null.
 */
size_t sl_evidence_len(const struct SlEvidence *ev);

/**
 * Ingests one measurement `(x, ẋ, u)` with `x`, `ẋ` of length `2n` and `u` of length `m`.
 *
 * # Safety
 * `ev` must be live; arrays must have the stated lengths.
 */
enum SlStatus sl_evidence_ingest(struct SlEvidence *ev,
                                 const double *x,
                                 const double *x_dot,
                                 const double *u,
                                 double t);

/**
 * Writes the cover `F(x)` (`n` bounds) and `G(x)` (row-major `n × m` bounds).
 *
 * # Safety
 * `ev` must be live; `x` has `2n` entries; outputs have `n` and `n·m` entries.
 */
enum SlStatus sl_evidence_cover(const struct SlEvidence *ev,
                                const double *x,
                                double *f_lo,
                                double *f_hi,
                                double *g_lo,
                                double *g_hi);

/**
 * Writes `ĝ(x)` row-major into `out` (`n · m` entries).
 *
 * # Safety
 * `ev` must be live; `x` has `2n` entries and `out` has `n·m` entries.
 */
enum SlStatus sl_evidence_estimate_g(const struct SlEvidence *ev,
                                     const double *x,
                                     double theta,
                                     double *out);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum SlStatus sl_scenario_load(const char *path, struct SlScenario **out);

/**
 * Parses and validates a scenario from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid.
 */
enum SlStatus sl_scenario_from_toml(const char *text, struct SlScenario **out);

/**
 * # Safety
 * `sc` must be null or a live scenario handle.
 */
void sl_scenario_free(struct SlScenario *sc);

/**
 * Runs the scenario to its horizon.
 *
 * # Safety
 * `sc` must be live; `out` must be valid.
 */
enum SlStatus sl_scenario_run(const struct SlScenario *sc, struct SlRun **out);

/**
 * # Safety
 * `run` must be null or a live run handle.
 */
void sl_run_free(struct SlRun *run);

/**
 * # Safety
 * `run` must be live; `out` must be valid.
 */
enum SlStatus sl_run_summary(const struct SlRun *run, struct SlSummary *out);

/**
 * Copies the trajectory CSV into `buf` (NUL-terminated). `needed` receives
 * the required size including the NUL; `BufferTooSmall` if `len` is short.
 *
 * # Safety
 * `run` must be live; `buf` null or `len` writable bytes; `needed` null or valid.
 */
enum SlStatus sl_run_trajectory_csv(const struct SlRun *run, char *buf, size_t len, size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFELEARN_H */
