#ifndef NCSIM_H
#define NCSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NcsStatus {
  NCS_STATUS_OK = 0,
  NCS_STATUS_NULL_POINTER = 1,
  NCS_STATUS_INVALID_ARGUMENT = 2,
  NCS_STATUS_CONFIG = 3,
  NCS_STATUS_DIMENSION = 4,
  NCS_STATUS_PARSE = 5,
  NCS_STATUS_NUMERICAL = 6,
  NCS_STATUS_IO = 7,
  NCS_STATUS_OUT_OF_RANGE = 8,
  NCS_STATUS_PANIC = 9,
} NcsStatus;

typedef enum NcsControlLaw {
  NCS_CONTROL_LAW_LQG = 0,
  NCS_CONTROL_LAW_ZERO = 1,
} NcsControlLaw;

/**
 * Result of a Monte Carlo run.
 */
typedef struct NcsReport NcsReport;

/**
 * Parsed and prepared scenario.
 */
typedef struct NcsScenario NcsScenario;

/**
 * Result of a threshold sweep.
 */
typedef struct NcsSweep NcsSweep;

typedef struct NcsCostSummary {
  uint64_t episodes;
  double j_mean;
  /**
   * NaN with a single episode.
   */
  double j_se;
  double transmissions_mean;
  /**
   * NaN when the closed form does not apply.
   */
  double jdp;
} NcsCostSummary;

typedef struct NcsNetworkSummary {
  uint64_t samples;
  uint64_t requests;
  uint64_t deliveries;
  double collision_rate;
  double drop_rate;
  /**
   * NaN when no loop has a threshold scheduler.
   */
  double bound_probability;
} NcsNetworkSummary;

typedef struct NcsSweepRow {
  double epsilon;
  double j_mean;
  double j_se;
  double bound_probability;
  double request_rate;
  double delivery_rate;
  double collision_rate;
  double drop_rate;
} NcsSweepRow;

typedef struct NcsMoments {
  double mean;
  double variance;
  double probability;
} NcsMoments;

typedef struct NcsTwoStep {
  double u0_optimal;
  double u0_ce;
  double residual_at_ce;
  double xhat00;
} NcsTwoStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *ncs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ncs_version(void);

/**
 * Loads a preset name or a TOML file path.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcsStatus ncs_scenario_load(const char *name, struct NcsScenario **out);

/**
 * Parses scenario TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NcsStatus ncs_scenario_parse(const char *toml, struct NcsScenario **out);

/**
 * # Safety
 * `scenario` must come from `ncs_scenario_load`/`ncs_scenario_parse` and not
 * be used afterwards. NULL is ignored.
 */
void ncs_scenario_free(struct NcsScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_scenario_loop_count(const struct NcsScenario *scenario, uint64_t *out);

/**
 * Monte Carlo run. A zero `seed` or `episodes` falls back to the scenario's
 * value, then to 1 and 1000.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_simulate(const struct NcsScenario *scenario,
                            uint64_t seed,
                            uint64_t episodes,
                            enum NcsControlLaw law,
                            struct NcsReport **out);

/**
 * # Safety
 * `report` must come from `ncs_simulate` and not be used afterwards.
 */
void ncs_report_free(struct NcsReport *report);

/**
 * Cost averaged over every loop.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_report_overall(const struct NcsReport *report, struct NcsCostSummary *out);

/**
 * Cost of loop `index`, in scenario order.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_report_loop(const struct NcsReport *report,
                               uint64_t index,
                               struct NcsCostSummary *out);

/**
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_report_network(const struct NcsReport *report, struct NcsNetworkSummary *out);

/**
 * Threshold sweep over the inclusive grid `lo:hi:step`.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_sweep(const struct NcsScenario *scenario,
                         double lo,
                         double hi,
                         double step,
                         uint64_t seed,
                         uint64_t episodes,
                         struct NcsSweep **out);

/**
 * # Safety
 * `sweep` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_sweep_len(const struct NcsSweep *sweep, uint64_t *out);

/**
 * # Safety
 * `sweep` must be a live handle and `out` a valid pointer.
 */
enum NcsStatus ncs_sweep_row(const struct NcsSweep *sweep, uint64_t index, struct NcsSweepRow *out);

/**
 * # Safety
 * `sweep` must come from `ncs_sweep` and not be used afterwards.
 */
void ncs_sweep_free(struct NcsSweep *sweep);

/**
 * Scalar finite-horizon Riccati recursion. `s_out` receives `horizon + 1`
 * values `S_0..S_N` and `l_out` receives `horizon` gains `L_0..L_{N-1}`.
 *
 * # Safety
 * `s_out` and `l_out` must point to arrays of the stated lengths.
 */
enum NcsStatus ncs_riccati_scalar(double a,
                                  double b,
                                  double q0,
                                  double q1,
                                  double q2,
                                  uint64_t horizon,
                                  double *s_out,
                                  double *l_out);

/**
 * Moments of `N(mean, variance)` conditioned on `X < upper`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NcsStatus ncs_truncated_moments(double mean,
                                     double variance,
                                     double upper,
                                     struct NcsMoments *out);

/**
 * Optimal first control of the two-step problem with unit weights and
 * variances. `delivered` selects whether `x0` reached the controller.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NcsStatus ncs_two_step_u0(double x0,
                               bool delivered,
                               double threshold,
                               double a,
                               double b,
                               struct NcsTwoStep *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NCSIM_H */
