#ifndef BIHARMONIC_IETI_H
#define BIHARMONIC_IETI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BihPrecond {
  BIH_PRECOND_SCALED = 0,
  BIH_PRECOND_MODIFIED = 1,
  BIH_PRECOND_NONE = 2,
} BihPrecond;

typedef enum BihStatus {
  BIH_STATUS_OK = 0,
  BIH_STATUS_NULL_POINTER = 1,
  BIH_STATUS_INVALID_ARGUMENT = 2,
  BIH_STATUS_IO = 3,
  BIH_STATUS_GEOMETRY = 4,
  BIH_STATUS_SOLVER = 5,
  /**
   * The solve hit the iteration cap; the result handle is still returned.
   */
  BIH_STATUS_NOT_CONVERGED = 6,
  BIH_STATUS_PANIC = 7,
} BihStatus;

typedef struct BihDomain BihDomain;

typedef struct BihResult BihResult;

typedef struct BihRunOptions {
  uint32_t degree;
  uint32_t refine;
  enum BihPrecond precond;
  double tol;
  uint32_t max_iter;
  /**
   * Nonzero to compare against the conforming direct solve.
   */
  uint8_t oracle;
} BihRunOptions;

typedef struct BihSummary {
  size_t patches;
  size_t dofs;
  size_t n_lambda;
  size_t n_primal;
  size_t iterations;
  double kappa;
  double relative_residual;
  uint8_t converged;
  double constraint_residual;
  /**
   * NaN unless requested.
   */
  double oracle_discrepancy;
  /**
   * NaN unless the domain carries the manufactured solution.
   */
  double h2_error;
  double seconds_total;
} BihSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Defaults: degree 2, refinement 3, scaled Dirichlet, tolerance 1e-6, 500 iterations.
 */
struct BihRunOptions bih_default_run_options(void);

/**
 * Builds a built-in domain (`unit_square`, `quarter_annulus`, `lamella`,
 * `two_squares`); `splits = 0` selects the domain default.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum BihStatus bih_domain_builtin(const char *name, uint32_t splits, struct BihDomain **out);

/**
 * Reads a multi-patch geometry from a JSON file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum BihStatus bih_domain_load(const char *path, struct BihDomain **out);

/**
 * # Safety
 * `domain` must come from this library; `path` must be NUL-terminated.
 */
enum BihStatus bih_domain_save(const struct BihDomain *domain, const char *path);

/**
 * # Safety
 * `domain` must come from this library and not be used afterwards.
 */
void bih_domain_free(struct BihDomain *domain);

/**
 * # Safety
 * `domain` must come from this library; `out` must be valid.
 */
enum BihStatus bih_domain_num_patches(const struct BihDomain *domain, size_t *out);

/**
 * Solves on `domain`. A run that does not converge returns
 * `BihStatus::NotConverged` together with a valid result handle.
 *
 * # Safety
 * `domain` must come from this library; `opts` may be null for defaults;
 * `out` must be valid.
 */
enum BihStatus bih_run(const struct BihDomain *domain,
                       const struct BihRunOptions *opts,
                       struct BihResult **out);

/**
 * # Safety
 * `result` must come from this library; `out` must be valid.
 */
enum BihStatus bih_result_summary(const struct BihResult *result, struct BihSummary *out);

/**
 * Copies the tensor-product coefficients of `patch` (x index fastest) into
 * `buf`. `len_out` receives the coefficient count; pass a null `buf` to
 * query it.
 *
 * # Safety
 * `result` must come from this library; `buf` must hold `len` doubles or be
 * null; `len_out` must be valid.
 */
enum BihStatus bih_result_patch_coeffs(const struct BihResult *result,
                                       size_t patch,
                                       double *buf,
                                       size_t len,
                                       size_t *len_out);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void bih_result_free(struct BihResult *result);

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *bih_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIHARMONIC_IETI_H */
