#ifndef SWITCHSIM_H
#define SWITCHSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SwitchsimBranch {
  SWITCHSIM_BRANCH_PLUS = 0,
  SWITCHSIM_BRANCH_MINUS = 1,
} SwitchsimBranch;

typedef enum SwitchsimStatus {
  SWITCHSIM_STATUS_OK = 0,
  SWITCHSIM_STATUS_INVALID_PARAMETER = 1,
  SWITCHSIM_STATUS_CONVERGENCE = 2,
  SWITCHSIM_STATUS_DEGENERATE = 3,
  SWITCHSIM_STATUS_QUADRATURE = 4,
  SWITCHSIM_STATUS_NULL_POINTER = 5,
  SWITCHSIM_STATUS_BUFFER_TOO_SMALL = 6,
  SWITCHSIM_STATUS_INTERNAL = 7,
} SwitchsimStatus;

/**
 * Opaque run handle.
 */
typedef struct SwitchsimRun SwitchsimRun;

/**
 * Input parameters. `cutoff = 0` selects the automatic schedule and a
 * non-positive `leak_tol` the library default.
 */
typedef struct SwitchsimParams {
  double r;
  double x;
  double y;
  double theta;
  double phi;
  size_t cutoff;
  double leak_tol;
} SwitchsimParams;

/**
 * Per-branch measures. NaN marks a value that was not computed.
 */
typedef struct SwitchsimMeasures {
  double probability;
  double norm_sq;
  double delta_ng;
  double delta_nc;
  size_t cutoff;
  bool degenerate;
} SwitchsimMeasures;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *switchsim_version(void);

/**
 * Balanced control and library tolerances for the given `(r, x, y)`.
 */
struct SwitchsimParams switchsim_params_default(double r, double x, double y);

/**
 * Copy the last error message of this thread into `buf` (truncated, always
 * NUL-terminated when `len > 0`). Returns the full message length without
 * the terminator, 0 if there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t switchsim_last_error(char *buf, size_t len);

/**
 * Simulate the switch. On success `*out` owns a new handle.
 *
 * # Safety
 * `params` must point to a valid struct and `out` to writable storage.
 */
enum SwitchsimStatus switchsim_run_new(const struct SwitchsimParams *params,
                                       struct SwitchsimRun **out);

/**
 * # Safety
 * `run` must be null or a handle from [`switchsim_run_new`] not yet freed.
 */
void switchsim_run_free(struct SwitchsimRun *run);

/**
 * Branch probabilities `p₊`, `p₋`.
 *
 * # Safety
 * `run` must be a live handle; the output pointers must be writable.
 */
enum SwitchsimStatus switchsim_run_probabilities(const struct SwitchsimRun *run,
                                                 double *p_plus,
                                                 double *p_minus);

/**
 * Fock cutoff of the run and its basis frame `D(c) S(s)|n⟩`.
 *
 * # Safety
 * `run` must be a live handle; the output pointers must be writable.
 */
enum SwitchsimStatus switchsim_run_basis(const struct SwitchsimRun *run,
                                         size_t *cutoff,
                                         double *squeeze,
                                         double *center_re,
                                         double *center_im);

/**
 * Copy the normalized branch amplitudes in the run's basis as interleaved
 * `re, im` pairs. `*count` receives the number of amplitudes (cutoff + 1);
 * pass `buf = NULL` to query it. `len` is the capacity in doubles.
 *
 * # Safety
 * `run` must be a live handle, `count` writable, and `buf` null or valid
 * for `len` doubles.
 */
enum SwitchsimStatus switchsim_run_amplitudes(const struct SwitchsimRun *run,
                                              enum SwitchsimBranch branch,
                                              double *buf,
                                              size_t len,
                                              size_t *count);

/**
 * Wigner function of a branch at one lab-frame point.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum SwitchsimStatus switchsim_run_wigner_at(const struct SwitchsimRun *run,
                                             enum SwitchsimBranch branch,
                                             double q,
                                             double p,
                                             double *out);

/**
 * Non-Gaussianity and (unless `ng_only`) non-classicality of both branches
 * on an `n_q × n_p` grid with automatic bounds; zero counts pick the default
 * grid.
 *
 * # Safety
 * `params` must be valid; `plus` and `minus` writable.
 */
enum SwitchsimStatus switchsim_measures(const struct SwitchsimParams *params,
                                        bool ng_only,
                                        size_t n_q,
                                        size_t n_p,
                                        struct SwitchsimMeasures *plus,
                                        struct SwitchsimMeasures *minus);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWITCHSIM_H */
