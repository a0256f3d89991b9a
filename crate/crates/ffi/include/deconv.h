#ifndef DECONV_H
#define DECONV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  DECONV_STATUS_OK = 0,
  DECONV_STATUS_NULL_POINTER = 1,
  DECONV_STATUS_INVALID_ARGUMENT = 2,
  DECONV_STATUS_NUMERICAL = 3,
  DECONV_STATUS_CONFIG = 4,
  DECONV_STATUS_IO = 5,
  DECONV_STATUS_PANIC = 6,
} DeconvStatus;

typedef enum {
  DECONV_METHOD_FILTER = 0,
  DECONV_METHOD_SPLIT_SMOOTH = 1,
  DECONV_METHOD_SPLIT_ABEL = 2,
  DECONV_METHOD_RECURSIVE = 3,
} DeconvMethod;

// Online recursive estimator fed one sample at a time.
typedef struct DeconvEstimator DeconvEstimator;

// A convolution kernel.
typedef struct DeconvKernel DeconvKernel;

// A generated problem together with the config it came from.
typedef struct DeconvProblem DeconvProblem;

// A reconstructed signal.
typedef struct DeconvSignal DeconvSignal;

// Result of a log-log rate fit.
typedef struct {
  double slope;
  double intercept;
  double stderr_slope;
  double theoretical_exponent;
  bool pass;
} DeconvRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *deconv_last_error(void);

// Built-in kernel by name: `unit`, `exp_decay`, `abel`, `abel_plus_smooth`,
// `unit_conv_exp`. `gamma` and `m_scale` are read only by the Abel kernels.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
DeconvStatus deconv_kernel_builtin(const char *name,
                                   double gamma,
                                   double m_scale,
                                   DeconvKernel **out);

// # Safety
// `kernel` must come from [`deconv_kernel_builtin`] or be null.
void deconv_kernel_free(DeconvKernel *kernel);

// Builds a problem from a TOML config string. `seed` replaces the config
// seed when `use_seed` is true.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
DeconvStatus deconv_problem_from_config(const char *config,
                                        bool use_seed,
                                        uint64_t seed,
                                        DeconvProblem **out);

// # Safety
// `problem` must come from [`deconv_problem_from_config`] or be null.
void deconv_problem_free(DeconvProblem *problem);

// Number of grid nodes.
//
// # Safety
// `problem` must be a live handle; `len` must be writable.
DeconvStatus deconv_problem_len(const DeconvProblem *problem, size_t *len);

// Copies the true solution into `buf`, which holds `cap` values.
//
// # Safety
// `problem` must be a live handle; `buf` must hold `cap` doubles.
DeconvStatus deconv_problem_copy_truth(const DeconvProblem *problem, double *buf, size_t cap);

// Copies the noisy data into `buf`, which holds `cap` values.
//
// # Safety
// `problem` must be a live handle; `buf` must hold `cap` doubles.
DeconvStatus deconv_problem_copy_noisy(const DeconvProblem *problem, double *buf, size_t cap);

// Solves the problem with the method parameters from its config.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
DeconvStatus deconv_solve_problem(const DeconvProblem *problem,
                                  DeconvMethod method,
                                  DeconvSignal **out);

// Solves `k * u = g` for measured `g` sampled at `len` equispaced nodes on
// `[0, horizon]` with noise bound `delta`, using automatic parameters.
// `d_exponent` is the decay exponent of the solution's transform; pass a
// negative value if it is unknown (the filter and recursive methods need it).
//
// # Safety
// `kernel` must be a live handle; `g` must hold `len` doubles.
DeconvStatus deconv_solve_data(const DeconvKernel *kernel,
                               const double *g,
                               size_t len,
                               double horizon,
                               double delta,
                               double d_exponent,
                               DeconvMethod method,
                               DeconvSignal **out);

// # Safety
// `signal` must come from a solve call or be null.
void deconv_signal_free(DeconvSignal *signal);

// Total number of nodes.
//
// # Safety
// `signal` must be a live handle; `len` must be writable.
DeconvStatus deconv_signal_len(const DeconvSignal *signal, size_t *len);

// Number of leading nodes on which the estimate is defined.
//
// # Safety
// `signal` must be a live handle; `len` must be writable.
DeconvStatus deconv_signal_valid_len(const DeconvSignal *signal, size_t *len);

// Copies all node values into `buf`, which holds `cap` values.
//
// # Safety
// `signal` must be a live handle; `buf` must hold `cap` doubles.
DeconvStatus deconv_signal_copy(const DeconvSignal *signal, double *buf, size_t cap);

// Online estimator with regularisation `alpha` and sampling step `step`.
//
// # Safety
// `kernel` must be a live handle; `out` must be writable.
DeconvStatus deconv_estimator_new(const DeconvKernel *kernel,
                                  double alpha,
                                  double step,
                                  DeconvEstimator **out);

// Feeds one sample. Writes the estimates it releases into `values` (room
// for two) and their number into `count`: none for the first sample, `v_0`
// and `v_1` for the second, one per sample afterwards.
//
// # Safety
// `estimator` must be a live handle; `values` must hold two doubles and
// `count` must be writable.
DeconvStatus deconv_estimator_push(DeconvEstimator *estimator,
                                   double xi,
                                   double *values,
                                   size_t *count);

// # Safety
// `estimator` must come from [`deconv_estimator_new`] or be null.
void deconv_estimator_free(DeconvEstimator *estimator);

// Least-squares slope of `log error` against `log delta` over per-delta
// medians; `pass` when within `tolerance` of `theoretical`.
//
// # Safety
// `deltas` and `errors` must hold `len` doubles; `out` must be writable.
DeconvStatus deconv_fit_rate(const double *deltas,
                             const double *errors,
                             size_t len,
                             double theoretical,
                             double tolerance,
                             DeconvRateFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DECONV_H */
