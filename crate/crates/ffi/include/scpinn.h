#ifndef SCPINN_H
#define SCPINN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScpinnStatus {
  SCPINN_STATUS_OK = 0,
  SCPINN_STATUS_NULL_POINTER = 1,
  SCPINN_STATUS_INVALID_ARGUMENT = 2,
  SCPINN_STATUS_CONFIG_ERROR = 3,
  SCPINN_STATUS_DIVERGED = 4,
  SCPINN_STATUS_INTERNAL = 5,
} ScpinnStatus;

/**
 * Tensor Legendre grid with its differentiation operator.
 */
typedef struct ScpinnGrid ScpinnGrid;

/**
 * Summary of a finished training run.
 */
typedef struct ScpinnReport ScpinnReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *scpinn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *scpinn_version(void);

/**
 * Creates the tensor grid of `(degree + 1)^dim` Legendre nodes.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum ScpinnStatus scpinn_grid_new(size_t dim, size_t degree, struct ScpinnGrid **out);

/**
 * Releases a grid. Null is ignored.
 *
 * # Safety
 * `grid` must come from [`scpinn_grid_new`] and not be used afterwards.
 */
void scpinn_grid_free(struct ScpinnGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle and `dim`, `len` valid out-pointers.
 */
enum ScpinnStatus scpinn_grid_shape(const struct ScpinnGrid *grid, size_t *dim, size_t *len);

/**
 * Writes the `len * dim` node coordinates.
 *
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum ScpinnStatus scpinn_grid_points(const struct ScpinnGrid *grid, double *out, size_t out_len);

/**
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum ScpinnStatus scpinn_grid_weights(const struct ScpinnGrid *grid, double *out, size_t out_len);

/**
 * Cubature of grid samples.
 *
 * # Safety
 * `values` must hold `len` doubles and `out` be writable.
 */
enum ScpinnStatus scpinn_grid_integrate(const struct ScpinnGrid *grid,
                                        const double *values,
                                        size_t len,
                                        double *out);

/**
 * Lagrange interpolant of grid samples at the point `x` of length `dim`.
 *
 * # Safety
 * `values` must hold `len` doubles, `x` hold `dim` doubles and `out` be
 * writable.
 */
enum ScpinnStatus scpinn_grid_interpolate(const struct ScpinnGrid *grid,
                                          const double *values,
                                          size_t len,
                                          const double *x,
                                          size_t dim,
                                          double *out);

/**
 * `order`-th derivative along `axis` of the interpolant, at the nodes.
 *
 * # Safety
 * `values` and `out` must each hold `len` doubles.
 */
enum ScpinnStatus scpinn_grid_diff(const struct ScpinnGrid *grid,
                                   const double *values,
                                   size_t len,
                                   size_t axis,
                                   size_t order,
                                   double *out);

/**
 * Laplacian of the interpolant, at the nodes.
 *
 * # Safety
 * `values` and `out` must each hold `len` doubles.
 */
enum ScpinnStatus scpinn_grid_laplacian(const struct ScpinnGrid *grid,
                                        const double *values,
                                        size_t len,
                                        double *out);

/**
 * Sobolev quadratic form of order `order`. `squared_weights` selects the
 * form weighted by squared cubature weights.
 *
 * # Safety
 * `values` must hold `len` doubles and `out` be writable.
 */
enum ScpinnStatus scpinn_grid_sobolev_quadratic(const struct ScpinnGrid *grid,
                                                const double *values,
                                                size_t len,
                                                size_t order,
                                                bool squared_weights,
                                                double *out);

/**
 * Trains the configuration given as TOML text and writes its outputs to
 * `output_dir` (or the configured directory when null). `inverse` selects
 * the inverse mode. A diverged run still yields a report alongside
 * `Diverged`.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string, `output_dir` null or
 * NUL-terminated, and `out` writable.
 */
enum ScpinnStatus scpinn_run(const char *config_toml,
                             const char *output_dir,
                             bool inverse,
                             struct ScpinnReport **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must come from [`scpinn_run`] and not be used afterwards.
 */
void scpinn_report_free(struct ScpinnReport *report);

/**
 * Relative L1 and maximum errors against the analytic solution.
 *
 * # Safety
 * `report` must be live; `eps1` and `eps_inf` writable.
 */
enum ScpinnStatus scpinn_report_errors(const struct ScpinnReport *report,
                                       double *eps1,
                                       double *eps_inf);

/**
 * Recovered parameter and its relative error. `InvalidArgument` for
 * forward runs.
 *
 * # Safety
 * `report` must be live; `lambda` and `eps_lambda` writable.
 */
enum ScpinnStatus scpinn_report_lambda(const struct ScpinnReport *report,
                                       double *lambda,
                                       double *eps_lambda);

/**
 * Final training loss (NaN when no epoch ran) and epoch count.
 *
 * # Safety
 * `report` must be live; `loss` and `epochs` writable.
 */
enum ScpinnStatus scpinn_report_training(const struct ScpinnReport *report,
                                         double *loss,
                                         size_t *epochs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCPINN_H */
