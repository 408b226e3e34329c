#ifndef HENON_RADIAL_H
#define HENON_RADIAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HenonRegime {
  HENON_REGIME_SUBCRITICAL = 0,
  HENON_REGIME_CRITICAL = 1,
  HENON_REGIME_SUPERCRITICAL = 2,
  HENON_REGIME_SUPERCRITICAL_BEYOND_SOBOLEV = 3,
  HENON_REGIME_P_EQUALS_N = 4,
} HenonRegime;

typedef enum HenonSingularityTag {
  HENON_SINGULARITY_TAG_REMOVABLE = 0,
  HENON_SINGULARITY_TAG_FUNDAMENTAL_ORDER = 1,
  HENON_SINGULARITY_TAG_CRITICAL_LOG_RATE = 2,
  HENON_SINGULARITY_TAG_SUPERCRITICAL_RATE = 3,
  HENON_SINGULARITY_TAG_UNCLASSIFIED = 4,
} HenonSingularityTag;

typedef enum HenonStability {
  HENON_STABILITY_STABLE_NODE = 0,
  HENON_STABILITY_STABLE_SPIRAL = 1,
  HENON_STABILITY_UNSTABLE_NODE = 2,
  HENON_STABILITY_UNSTABLE_SPIRAL = 3,
  HENON_STABILITY_SADDLE = 4,
  HENON_STABILITY_DEGENERATE = 5,
} HenonStability;

typedef enum HenonStatus {
  HENON_STATUS_OK = 0,
  HENON_STATUS_INVALID_PARAMS = 1,
  HENON_STATUS_INVALID_ARGUMENT = 2,
  HENON_STATUS_INSUFFICIENT_DATA = 3,
  HENON_STATUS_NUMERICAL = 4,
  HENON_STATUS_SINGULAR_LOCUS = 5,
  HENON_STATUS_IO = 6,
  HENON_STATUS_NULL_POINTER = 7,
  HENON_STATUS_PANIC = 8,
} HenonStatus;

typedef enum HenonTerminal {
  HENON_TERMINAL_REACHED_R_MAX = 0,
  HENON_TERMINAL_HIT_ZERO = 1,
  HENON_TERMINAL_BLOW_UP = 2,
  HENON_TERMINAL_STEP_UNDERFLOW = 3,
} HenonTerminal;

/**
 * Opaque problem parameters.
 */
typedef struct HenonParams HenonParams;

/**
 * Opaque sampled radial profile.
 */
typedef struct HenonSolution HenonSolution;

typedef struct HenonTolerances {
  double rtol;
  double atol;
  uintptr_t samples;
} HenonTolerances;

typedef struct HenonExponents {
  double beta;
  double delta;
  double gamma;
  double q_serrin;
  double q_sobolev;
  double c1;
  double a1;
  double a2;
  double a3;
  double lambda;
  double crit_log_const;
  double omega;
} HenonExponents;

typedef struct HenonShootInfo {
  enum HenonTerminal terminal;
  bool has_first_zero;
  double first_zero;
} HenonShootInfo;

typedef struct HenonClassification {
  enum HenonSingularityTag tag;
  double c;
  double c_tilde;
  double rate_constant;
  double exponent;
  double log_exponent;
} HenonClassification;

typedef struct HenonLinearization {
  double jacobian[4];
  double eigen_re[2];
  double eigen_im[2];
  enum HenonStability stability;
  /**
   * Distance between numerical and closed-form eigenvalues; NaN when
   * no closed form applies.
   */
  double analytic_deviation;
} HenonLinearization;

typedef struct HenonIdentity {
  double radius;
  double residual;
  double relative_residual;
} HenonIdentity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *henon_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *henon_version(void);

struct HenonTolerances henon_tolerances_default(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HenonStatus henon_params_new(uint32_t n,
                                  double p,
                                  double q,
                                  double alpha,
                                  struct HenonParams **out_params);

/**
 * # Safety
 * `params` must be NULL or a handle from `henon_params_new` not yet freed.
 */
void henon_params_free(struct HenonParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out_exponents` writable.
 */
enum HenonStatus henon_exponents(const struct HenonParams *params,
                                 struct HenonExponents *out_exponents);

/**
 * # Safety
 * `params` must be a live handle and `out_regime` writable.
 */
enum HenonStatus henon_regime(const struct HenonParams *params, enum HenonRegime *out_regime);

/**
 * μ(r) and μ'(r).
 *
 * # Safety
 * `params` must be a live handle; `out_mu` and `out_dmu` writable.
 */
enum HenonStatus henon_fundamental_solution(const struct HenonParams *params,
                                            double r,
                                            double *out_mu,
                                            double *out_dmu);

/**
 * Regular solution with `u(0) = u0` on `(0, r_max]`. `tol` may be NULL
 * for the defaults. `out_info` may be NULL.
 *
 * # Safety
 * `params` must be a live handle; `tol` NULL or readable; `out_solution`
 * writable; `out_info` NULL or writable.
 */
enum HenonStatus henon_shoot_regular(const struct HenonParams *params,
                                     double u0,
                                     double r_max,
                                     const struct HenonTolerances *tol,
                                     struct HenonSolution **out_solution,
                                     struct HenonShootInfo *out_info);

/**
 * `λ r^{-δ}` on `points` geometrically spaced radii in `[r_min, r_max]`.
 *
 * # Safety
 * `params` must be a live handle and `out_solution` writable.
 */
enum HenonStatus henon_exact_singular(const struct HenonParams *params,
                                      double r_min,
                                      double r_max,
                                      uintptr_t points,
                                      struct HenonSolution **out_solution);

/**
 * Wraps caller samples. `flux` may be NULL, in which case it is derived
 * from `u` by finite differences (at least 5 samples required).
 *
 * # Safety
 * `r`, `u` and (if non-NULL) `flux` must each point to `len` readable
 * doubles; `out_solution` must be writable.
 */
enum HenonStatus henon_solution_from_arrays(const struct HenonParams *params,
                                            const double *r,
                                            const double *u,
                                            const double *flux,
                                            uintptr_t len,
                                            struct HenonSolution **out_solution);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `sol` must be NULL or a live handle.
 */
uintptr_t henon_solution_len(const struct HenonSolution *sol);

/**
 * Copies samples into caller buffers of capacity `cap`. Any of `r`, `u`,
 * `flux` may be NULL to skip that column.
 *
 * # Safety
 * `sol` must be a live handle; each non-NULL buffer must hold `cap` doubles.
 */
enum HenonStatus henon_solution_copy(const struct HenonSolution *sol,
                                     double *r,
                                     double *u,
                                     double *flux,
                                     uintptr_t cap);

/**
 * # Safety
 * `sol` must be NULL or a live handle not yet freed.
 */
void henon_solution_free(struct HenonSolution *sol);

/**
 * Singularity class of a profile near its innermost radius.
 *
 * # Safety
 * `sol` must be a live handle and `out_class` writable.
 */
enum HenonStatus henon_classify(const struct HenonSolution *sol,
                                struct HenonClassification *out_class);

/**
 * # Safety
 * `sol` must be a live handle and `out_mass` writable.
 */
enum HenonStatus henon_dirac_mass(const struct HenonSolution *sol, double *out_mass);

/**
 * Linearization of the phase-plane field at `(w, dw)`. `h <= 0` selects
 * the default step.
 *
 * # Safety
 * `params` must be a live handle and `out_lin` writable.
 */
enum HenonStatus henon_linearize(const struct HenonParams *params,
                                 double w,
                                 double dw,
                                 double h,
                                 struct HenonLinearization *out_lin);

/**
 * Pohozaev identity on the ball of radius `radius` for a regular profile.
 *
 * # Safety
 * `sol` must be a live handle and `out_identity` writable.
 */
enum HenonStatus henon_pohozaev(const struct HenonSolution *sol,
                                double radius,
                                struct HenonIdentity *out_identity);

/**
 * Energy identity on the ball of radius `radius` for a regular profile.
 *
 * # Safety
 * `sol` must be a live handle and `out_identity` writable.
 */
enum HenonStatus henon_energy(const struct HenonSolution *sol,
                              double radius,
                              struct HenonIdentity *out_identity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HENON_RADIAL_H */
