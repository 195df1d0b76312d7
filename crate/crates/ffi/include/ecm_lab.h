#ifndef ECM_LAB_H
#define ECM_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which series [`ecm_path_copy`] extracts.
typedef enum EcmSeries {
  ECM_SERIES_PRICE = 0,
  ECM_SERIES_NORMAL_PRICE = 1,
  // Inverted mispricing, normal price over price.
  ECM_SERIES_Q = 2,
  // 1 where a correction occurred on the step into this state, else 0.
  ECM_SERIES_JUMP = 3,
} EcmSeries;

typedef enum EcmStatus {
  ECM_STATUS_OK = 0,
  ECM_STATUS_NULL_POINTER = 1,
  ECM_STATUS_INVALID_ARGUMENT = 2,
  ECM_STATUS_INVALID_PARAMS = 3,
  ECM_STATUS_DOMAIN = 4,
  ECM_STATUS_PATH_OVERFLOW = 5,
  ECM_STATUS_EMPTY_FEASIBLE_INTERVAL = 6,
  ECM_STATUS_DEGENERATE_APPROX = 7,
  ECM_STATUS_HORIZON_MISMATCH = 8,
  ECM_STATUS_BUFFER_TOO_SMALL = 9,
  ECM_STATUS_CONFIG = 10,
  ECM_STATUS_IO = 11,
  ECM_STATUS_PANIC = 12,
} EcmStatus;

typedef enum EcmStrategy {
  ECM_STRATEGY_BUY_AND_HOLD = 0,
  ECM_STRATEGY_SIXTY_FORTY = 1,
  ECM_STRATEGY_CK_BOUNDED = 2,
  ECM_STRATEGY_CK_UNBOUNDED = 3,
  ECM_STRATEGY_ECO_BOUNDED = 4,
  ECM_STRATEGY_ECO_UNBOUNDED = 5,
} EcmStrategy;

// Parameters plus a lazily filled allocation table. Not thread safe; use
// one allocator per thread.
typedef struct EcmAllocator EcmAllocator;

// A generated price path.
typedef struct EcmPath EcmPath;

// Model parameters in per-step units.
typedef struct EcmParams {
  double r_d;
  double r_n;
  double sigma;
  double rho;
  double k_bar;
  double sigma_kappa;
  double r_f;
  double p0;
} EcmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the current thread's last error message into `buf` (NUL
// terminated, truncated to `len`) and returns the full message length in
// bytes, excluding the terminator. `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ecm_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ecm_version(void);

// Writes the base parameter set to `out`.
//
// # Safety
// `out` must be null or valid for writes.
enum EcmStatus ecm_params_base(struct EcmParams *out);

// Builds per-step parameters from annual rates and volatility with the
// 252-day convention: `r = ln(1 + annual) / 252`, `sigma = annual / sqrt(252)`.
//
// # Safety
// `out` must be null or valid for writes.
enum EcmStatus ecm_params_from_annual(double drift,
                                      double normal_rate,
                                      double volatility,
                                      double rho,
                                      double k_bar,
                                      double sigma_kappa,
                                      double risk_free,
                                      struct EcmParams *out);

// Checks the parameter invariants.
//
// # Safety
// `params` must be null or point to a valid `EcmParams`.
enum EcmStatus ecm_params_validate(const struct EcmParams *params);

// Generates path `sim_index` of the ensemble addressed by `seed`.
//
// # Safety
// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
// The handle written to `out` must be released with [`ecm_path_free`].
enum EcmStatus ecm_path_generate(const struct EcmParams *params,
                                 size_t horizon,
                                 uint64_t seed,
                                 uint64_t sim_index,
                                 struct EcmPath **out);

// # Safety
// `path` must be null or a handle from [`ecm_path_generate`] not yet freed.
void ecm_path_free(struct EcmPath *path);

// Number of steps; the path holds `horizon + 1` states. Returns 0 for null.
//
// # Safety
// `path` must be null or a live handle.
size_t ecm_path_horizon(const struct EcmPath *path);

// Copies `horizon + 1` values of `series` into `buf`.
//
// # Safety
// `path` must be a live handle and `buf` must point to `len` writable doubles.
enum EcmStatus ecm_path_copy(const struct EcmPath *path,
                             enum EcmSeries series,
                             double *buf,
                             size_t len);

// Creates an allocator for `params` with default quadrature.
//
// # Safety
// `params` must point to a valid `EcmParams`; `out` must be valid for
// writes. Release the handle with [`ecm_allocator_free`].
enum EcmStatus ecm_allocator_new(const struct EcmParams *params, struct EcmAllocator **out);

// # Safety
// `alloc` must be null or a handle from [`ecm_allocator_new`] not yet freed.
void ecm_allocator_free(struct EcmAllocator *alloc);

// Risky fraction of `strategy` at inverted mispricing `q`, using the
// interpolated crash-aware solver and the discount-rate drift for the
// classical Kelly strategies.
//
// # Safety
// `alloc` must be a live handle; `out` must be valid for writes.
enum EcmStatus ecm_allocator_lambda(struct EcmAllocator *alloc,
                                    enum EcmStrategy strategy,
                                    double q,
                                    double *out);

// Runs `strategy` over `path` and writes `horizon + 1` wealth values into
// `wealth` (starting at 1). `default_step` receives the first step with
// zero wealth, or -1 if the strategy never defaulted.
//
// # Safety
// `alloc` and `path` must be live handles, `wealth` must point to `len`
// writable doubles and `default_step` must be null or valid for writes.
enum EcmStatus ecm_run_strategy(struct EcmAllocator *alloc,
                                const struct EcmPath *path,
                                enum EcmStrategy strategy,
                                double *wealth,
                                size_t len,
                                int64_t *default_step);

// Expected one-step log growth of fraction `lambda` at mispricing `q`;
// `-inf` when some quadrature node ruins the investor.
//
// # Safety
// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
enum EcmStatus ecm_expected_log_growth(const struct EcmParams *params,
                                       double q,
                                       double lambda,
                                       double *out);

// Crash-aware Kelly fraction by direct maximization within `[lo, hi]`.
// Infinite bounds are allowed.
//
// # Safety
// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
enum EcmStatus ecm_kelly_numeric(const struct EcmParams *params,
                                 double q,
                                 double lo,
                                 double hi,
                                 double *out);

// Closed-form second-order approximation of the crash-aware fraction.
//
// # Safety
// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
enum EcmStatus ecm_kelly_approx(const struct EcmParams *params,
                                double q,
                                double lo,
                                double hi,
                                double *out);

// Classical Kelly fraction `(mu - r_f) / sigma^2` clipped to `[lo, hi]`.
//
// # Safety
// `out` must be valid for writes.
enum EcmStatus ecm_kelly_classical(double mu,
                                   double r_f,
                                   double sigma,
                                   double lo,
                                   double hi,
                                   double *out);

// Writes the `count` jump sizes and probabilities of the discretized
// correction distribution. Needs buffers of `count` doubles each.
//
// # Safety
// `kappa` and `eta` must point to `count` writable doubles.
enum EcmStatus ecm_jump_menu(double k_bar,
                             double sigma_kappa,
                             size_t count,
                             double *kappa,
                             double *eta);

// Default number of jump nodes used by the engine.
size_t ecm_default_jump_nodes(void);

// Runs a command line subcommand (`"paths"`, `"compare"`, `"sweep-window"`,
// `"sweep-param"`, `"error-scan"`, `"sign-test"`) from a JSON config and
// writes its files under `out_dir`, overriding the config's directory when
// non-null.
//
// # Safety
// `command` and `config_json` must be NUL-terminated strings; `out_dir`
// must be null or NUL terminated.
enum EcmStatus ecm_run_command(const char *command, const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECM_LAB_H */
