#ifndef MAXWEIGHT_LAB_H
#define MAXWEIGHT_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MwlQueueVerdict {
  MWL_QUEUE_VERDICT_DELAY_STABLE = 0,
  MWL_QUEUE_VERDICT_DELAY_UNSTABLE = 1,
  MWL_QUEUE_VERDICT_BOUNDARY = 2,
  MWL_QUEUE_VERDICT_NOT_APPLICABLE = 3,
} MwlQueueVerdict;

typedef enum MwlStatus {
  MWL_STATUS_OK = 0,
  MWL_STATUS_NULL_POINTER = 1,
  MWL_STATUS_INVALID_ARGUMENT = 2,
  MWL_STATUS_CONFIG = 3,
  MWL_STATUS_DOMAIN = 4,
  MWL_STATUS_RUNTIME = 5,
  MWL_STATUS_BUFFER_TOO_SMALL = 6,
  MWL_STATUS_PANIC = 7,
} MwlStatus;

/**
 * Validated simulation configuration.
 */
typedef struct MwlConfig MwlConfig;

/**
 * Finished simulation report, held as JSON.
 */
typedef struct MwlReport MwlReport;

/**
 * One replication, advanced slot by slot.
 */
typedef struct MwlSimulator MwlSimulator;

/**
 * Analytic verdict for `λ = (λ₁, λ₂, λ₃)`. `mu12`/`mu3` are NaN when
 * unstable.
 */
typedef struct MwlRegionVerdict {
  bool stable;
  double threshold;
  double mu12;
  double mu3;
  enum MwlQueueVerdict queue_verdicts[3];
} MwlRegionVerdict;

typedef struct MwlFluidTrajectory {
  double b;
  double t1;
  double t2;
  double q1_t1;
  double q3_t1;
  double mu[3];
  double q2_growth_rate;
  double q2_peak;
  /**
   * 1 or 3: the queue that empties first in phase 2.
   */
  uint32_t phase2_emptier;
  bool queue2_capped;
} MwlFluidTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mwl_version(void);

/**
 * Copies this thread's last error message into `buf`. `written` receives
 * the size needed, including the terminating NUL (1 when there is none).
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null; `written` must be valid or null.
 */
enum MwlStatus mwl_last_error_message(char *buf, size_t cap, size_t *written);

/**
 * Parses and validates a JSON configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum MwlStatus mwl_config_from_json(const char *json, struct MwlConfig **out);

/**
 * # Safety
 * `config` must come from [`mwl_config_from_json`] and not be used again.
 */
void mwl_config_free(struct MwlConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum MwlStatus mwl_config_set_seed(struct MwlConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum MwlStatus mwl_config_set_horizon(struct MwlConfig *config, uint64_t horizon);

/**
 * Hex SHA-256 digest of the configuration (65 bytes with the NUL).
 *
 * # Safety
 * `config` must be a live handle; `buf` valid for `cap` bytes or null;
 * `written` valid or null.
 */
enum MwlStatus mwl_config_digest(const struct MwlConfig *config,
                                 char *buf,
                                 size_t cap,
                                 size_t *written);

/**
 * Starts replication `replication` of `config` from its initial lengths.
 *
 * # Safety
 * `config` must be a live handle; `out` valid for writes.
 */
enum MwlStatus mwl_simulator_new(const struct MwlConfig *config,
                                 uint32_t replication,
                                 struct MwlSimulator **out);

/**
 * # Safety
 * `sim` must come from [`mwl_simulator_new`] and not be used again.
 */
void mwl_simulator_free(struct MwlSimulator *sim);

/**
 * Number of queues, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be a live handle or null.
 */
size_t mwl_simulator_num_queues(const struct MwlSimulator *sim);

/**
 * Slots simulated so far, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be a live handle or null.
 */
uint64_t mwl_simulator_slot(const struct MwlSimulator *sim);

/**
 * Advances `slots` slots.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum MwlStatus mwl_simulator_run(struct MwlSimulator *sim, uint64_t slots);

/**
 * Copies the current queue lengths into `lengths`, which must hold exactly
 * [`mwl_simulator_num_queues`] entries.
 *
 * # Safety
 * `sim` must be a live handle; `lengths` valid for `n` writes.
 */
enum MwlStatus mwl_simulator_lengths(const struct MwlSimulator *sim, uint64_t *lengths, size_t n);

/**
 * Runs every replication of `config` on `threads` workers (0 = all cores)
 * and builds the estimator report.
 *
 * # Safety
 * `config` must be a live handle; `out` valid for writes.
 */
enum MwlStatus mwl_simulate(const struct MwlConfig *config, size_t threads, struct MwlReport **out);

/**
 * The report as NUL-terminated JSON, owned by the handle; null for a null
 * handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
const char *mwl_report_json(const struct MwlReport *report);

/**
 * # Safety
 * `report` must come from [`mwl_simulate`] and not be used again.
 */
void mwl_report_free(struct MwlReport *report);

/**
 * Stability and delay-stability verdicts, heavy traffic at queue 1.
 *
 * # Safety
 * `lambda` must be valid for `n` reads; `out` valid for writes.
 */
enum MwlStatus mwl_region_classify(const double *lambda, size_t n, struct MwlRegionVerdict *out);

/**
 * Fluid trajectory of a burst of `b` packets at queue 1.
 *
 * # Safety
 * `lambda` must be valid for `n` reads; `out` valid for writes.
 */
enum MwlStatus mwl_fluid_burst(const double *lambda,
                               size_t n,
                               double b,
                               struct MwlFluidTrajectory *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXWEIGHT_LAB_H */
