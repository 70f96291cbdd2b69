#ifndef MLMC_FEM_H
#define MLMC_FEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlmcAllocation {
  MLMC_ALLOCATION_GILES = 0,
  MLMC_ALLOCATION_THEORETICAL = 1,
} MlmcAllocation;

typedef enum MlmcMode {
  MLMC_MODE_UNIFORM = 0,
  MLMC_MODE_ADAPTIVE = 1,
} MlmcMode;

// Result code of every fallible call.
typedef enum MlmcStatus {
  MLMC_STATUS_OK = 0,
  MLMC_STATUS_NULL_POINTER = 1,
  MLMC_STATUS_INVALID_ARGUMENT = 2,
  MLMC_STATUS_SOLVER_DIVERGED = 3,
  MLMC_STATUS_REFINEMENT_LIMIT = 4,
  MLMC_STATUS_LEVEL_CAP = 5,
  MLMC_STATUS_NUMERICAL = 6,
  MLMC_STATUS_BUFFER_TOO_SMALL = 7,
  MLMC_STATUS_IO = 8,
  MLMC_STATUS_PANIC = 9,
} MlmcStatus;

// Calibrated initial estimator norm.
typedef struct MlmcCalibration MlmcCalibration;

// A benchmark problem with its random data.
typedef struct MlmcProblem MlmcProblem;

// Result of an MLMC run.
typedef struct MlmcReport MlmcReport;

// Settings of an MLMC run.
typedef struct MlmcSettings MlmcSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mlmc_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the next call.
const char *mlmc_last_error_message(void);

// Short name of a status code as a static string.
const char *mlmc_status_name(enum MlmcStatus status);

// Poisson benchmark on the square with singularity strength `beta > 0`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum MlmcStatus mlmc_problem_poisson(double beta, struct MlmcProblem **out);

// One-dimensional obstacle benchmark.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum MlmcStatus mlmc_problem_obstacle(struct MlmcProblem **out);

// Space dimension of the problem, 0 for NULL.
//
// # Safety
// `problem` must be NULL or a live handle.
uint32_t mlmc_problem_dim(const struct MlmcProblem *problem);

// # Safety
// `problem` must be NULL or a handle not yet freed.
void mlmc_problem_free(struct MlmcProblem *problem);

// Default settings for `problem` in the given refinement mode.
//
// # Safety
// `problem` must be a live handle and `out` writable.
enum MlmcStatus mlmc_settings_new(const struct MlmcProblem *problem,
                                  enum MlmcMode mode,
                                  struct MlmcSettings **out);

// # Safety
// `settings` must be NULL or a handle not yet freed.
void mlmc_settings_free(struct MlmcSettings *settings);

// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_seed(struct MlmcSettings *settings,
                                       uint64_t seed,
                                       uint32_t replica);

// Dörfler parameter in `(0, 1]`.
//
// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_theta(struct MlmcSettings *settings, double theta);

// Minimal sample count per level, at least 2.
//
// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_m_min(struct MlmcSettings *settings, size_t m_min);

// Level tolerance ratio in `(0, 1)`.
//
// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_q(struct MlmcSettings *settings, double q);

// Algebraic solver tolerance factor, positive.
//
// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_sigma_alg(struct MlmcSettings *settings, double sigma_alg);

// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_allocation(struct MlmcSettings *settings,
                                             enum MlmcAllocation allocation);

// Samples used when `mlmc_run` calibrates on its own.
//
// # Safety
// `settings` must be a live handle.
enum MlmcStatus mlmc_settings_set_calibration_samples(struct MlmcSettings *settings, size_t n);

// Estimates the initial estimator norm from `n` samples drawn with `settings`' seed.
//
// # Safety
// `problem` and `settings` must be live handles and `out` writable.
enum MlmcStatus mlmc_calibrate(const struct MlmcProblem *problem,
                               const struct MlmcSettings *settings,
                               size_t n,
                               struct MlmcCalibration **out);

// Calibrated `‖η^{(1)}‖`, NaN for NULL.
//
// # Safety
// `calibration` must be NULL or a live handle.
double mlmc_calibration_eta1(const struct MlmcCalibration *calibration);

// # Safety
// `calibration` must be NULL or a handle not yet freed.
void mlmc_calibration_free(struct MlmcCalibration *calibration);

// Runs the MLMC estimator to tolerance `tol`. `calibration` may be NULL, in which
// case the run calibrates first.
//
// # Safety
// `problem` and `settings` must be live handles, `calibration` NULL or live, `out` writable.
enum MlmcStatus mlmc_run(const struct MlmcProblem *problem,
                         const struct MlmcSettings *settings,
                         const struct MlmcCalibration *calibration,
                         double tol,
                         struct MlmcReport **out);

// # Safety
// `report` must be NULL or a handle not yet freed.
void mlmc_report_free(struct MlmcReport *report);

// Number of levels used, 0 for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
size_t mlmc_report_num_levels(const struct MlmcReport *report);

// Total unknowns over all samples and levels, 0 for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
uint64_t mlmc_report_total_cost(const struct MlmcReport *report);

// Per-level statistics for `level` in `1..=num_levels`. Any output pointer may be NULL.
//
// # Safety
// `report` must be a live handle; non-NULL outputs must be writable.
enum MlmcStatus mlmc_report_level(const struct MlmcReport *report,
                                  size_t level,
                                  size_t *samples,
                                  double *variance,
                                  double *avg_cost);

// Number of vertices of the estimate's mesh, 0 for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
size_t mlmc_report_num_vertices(const struct MlmcReport *report);

// Copies the nodal values of the estimate into `values[0..len]`; `len` must be at least the vertex count.
//
// # Safety
// `report` must be a live handle and `values` valid for `len` writes.
enum MlmcStatus mlmc_report_values(const struct MlmcReport *report,
                                   double *values,
                                   size_t len);

// Copies vertex coordinates as interleaved `(x, y)` pairs; `len` must be at least twice the vertex count.
// One-dimensional meshes report `y = 0`.
//
// # Safety
// `report` must be a live handle and `coords` valid for `len` writes.
enum MlmcStatus mlmc_report_coords(const struct MlmcReport *report,
                                   double *coords,
                                   size_t len);

// Full H¹ distance between the estimate and a quadrature reference of `E[u]`.
//
// # Safety
// `report` and `problem` must be live handles and `error` writable.
enum MlmcStatus mlmc_report_h1_error(const struct MlmcReport *report,
                                     const struct MlmcProblem *problem,
                                     size_t resolution,
                                     double *error);

// Writes the JSON summary as a NUL-terminated string into `buf[0..cap]`.
// `needed` (may be NULL) receives the required size including the NUL, also on
// [`MlmcStatus::BufferTooSmall`]; `buf` may be NULL when `cap` is 0.
//
// # Safety
// `report` must be a live handle and `buf` valid for `cap` writes.
enum MlmcStatus mlmc_report_json(const struct MlmcReport *report,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

// Writes the plain-text dump of the estimate's mesh to the file at `path`.
//
// # Safety
// `report` must be a live handle and `path` a NUL-terminated string.
enum MlmcStatus mlmc_report_write_mesh(const struct MlmcReport *report, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLMC_FEM_H */
