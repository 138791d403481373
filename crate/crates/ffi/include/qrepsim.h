#ifndef QREPSIM_H
#define QREPSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrsStatus {
  QRS_STATUS_OK = 0,
  QRS_STATUS_NULL_POINTER = 1,
  QRS_STATUS_INVALID_ARGUMENT = 2,
  QRS_STATUS_CONFIG = 3,
  QRS_STATUS_MODEL = 4,
  QRS_STATUS_OUT_OF_RANGE = 5,
  QRS_STATUS_NOT_FOUND = 6,
  QRS_STATUS_PANIC = 7,
} QrsStatus;

typedef struct QrsCampaign QrsCampaign;

typedef struct QrsPass QrsPass;

typedef struct QrsScenario QrsScenario;

/**
 * Memory in time-bin units: `ln_p = -1/(tau R)`, `ln_coh = -1/(T R)`.
 */
typedef struct QrsMemory {
  double ln_p;
  double ln_coh;
  double eta_ret;
  double eta_plus;
} QrsMemory;

typedef struct QrsRates {
  double attempted;
  double successful;
  double correct;
  double erroneous;
  double secure;
  double qber_x;
} QrsRates;

typedef struct QrsStep {
  double t_s;
  double theta_a_deg;
  double theta_b_deg;
  double l_a_km;
  double l_b_km;
  double l_is_a_km;
  double l_is_b_km;
  double eta_a;
  double eta_b;
  double trt_a_s;
  double trt_b_s;
  uint64_t d_cut_a;
  uint64_t d_cut_b;
  /**
   * Hz.
   */
  struct QrsRates rates;
  bool linked;
  bool night;
} QrsStep;

typedef struct QrsPassSummary {
  double t_start_s;
  double t_end_s;
  double duration_s;
  double max_theta_a_deg;
  double max_theta_b_deg;
  struct QrsRates peak_hz;
  struct QrsRates totals;
  bool night;
  bool truncated;
} QrsPassSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *qrs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qrs_version(void);

/**
 * Expected counts per time bin for fixed link probabilities, round trips and
 * cutoffs (all in bins).
 *
 * # Safety
 * `mem_a`, `mem_b` and `out` must be valid pointers.
 */
enum QrsStatus qrs_bsm_rates(double eta_a,
                             double eta_b,
                             uint64_t d_rt_a,
                             uint64_t d_rt_b,
                             uint64_t d_cut_a,
                             uint64_t d_cut_b,
                             const struct QrsMemory *mem_a,
                             const struct QrsMemory *mem_b,
                             struct QrsRates *out);

/**
 * Optimal cutoffs (bins) maximising the secure count per bin.
 *
 * # Safety
 * `mem_a`, `mem_b`, `d_cut_a`, `d_cut_b` and `out` must be valid pointers.
 */
enum QrsStatus qrs_optimize_cutoffs(double eta_a,
                                    double eta_b,
                                    uint64_t d_rt_a,
                                    uint64_t d_rt_b,
                                    const struct QrsMemory *mem_a,
                                    const struct QrsMemory *mem_b,
                                    uint64_t *d_cut_a,
                                    uint64_t *d_cut_b,
                                    struct QrsRates *out);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QrsStatus qrs_scenario_from_toml(const char *toml, struct QrsScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QrsStatus qrs_scenario_from_file(const char *path, struct QrsScenario **out);

/**
 * Overrides the evaluation step, s.
 *
 * # Safety
 * `scn` must come from `qrs_scenario_from_*`.
 */
enum QrsStatus qrs_scenario_set_step(struct QrsScenario *scn, double step_s);

/**
 * # Safety
 * `scn` must be NULL or come from `qrs_scenario_from_*`, and not be used
 * afterwards.
 */
void qrs_scenario_free(struct QrsScenario *scn);

/**
 * Simulates the pass centred on the constellation epoch, `half_window_s`
 * either side; a non-positive value uses the scenario's window.
 *
 * # Safety
 * `scn` must be a live scenario handle and `out` a valid pointer.
 */
enum QrsStatus qrs_simulate_pass(const struct QrsScenario *scn,
                                 double half_window_s,
                                 struct QrsPass **out);

/**
 * Number of steps in a pass result; 0 for NULL.
 *
 * # Safety
 * `pass` must be NULL or a live pass handle.
 */
size_t qrs_pass_len(const struct QrsPass *pass);

/**
 * # Safety
 * `pass` must be a live pass handle and `out` a valid pointer.
 */
enum QrsStatus qrs_pass_step(const struct QrsPass *pass, size_t index, struct QrsStep *out);

/**
 * Summary of the linked part of the pass; `NOT_FOUND` when no step linked.
 *
 * # Safety
 * `pass` must be a live pass handle and `out` a valid pointer.
 */
enum QrsStatus qrs_pass_summary(const struct QrsPass *pass, struct QrsPassSummary *out);

/**
 * # Safety
 * `pass` must be NULL or a live pass handle, not used afterwards.
 */
void qrs_pass_free(struct QrsPass *pass);

/**
 * Runs a campaign over `duration_days` (non-positive: the scenario's value)
 * with two-resolution stepping.
 *
 * # Safety
 * `scn` must be a live scenario handle and `out` a valid pointer.
 */
enum QrsStatus qrs_annual_campaign(const struct QrsScenario *scn,
                                   double duration_days,
                                   struct QrsCampaign **out);

/**
 * # Safety
 * `c` must be NULL or a live campaign handle.
 */
size_t qrs_campaign_pass_count(const struct QrsCampaign *c);

/**
 * # Safety
 * `c` must be a live campaign handle and `out` a valid pointer.
 */
enum QrsStatus qrs_campaign_pass(const struct QrsCampaign *c,
                                 size_t index,
                                 struct QrsPassSummary *out);

/**
 * Integrated counts over all passes and over night passes only.
 *
 * # Safety
 * `c` must be a live campaign handle; `total` and `night` valid pointers.
 */
enum QrsStatus qrs_campaign_totals(const struct QrsCampaign *c,
                                   struct QrsRates *total,
                                   struct QrsRates *night);

/**
 * # Safety
 * `c` must be NULL or a live campaign handle, not used afterwards.
 */
void qrs_campaign_free(struct QrsCampaign *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QREPSIM_H */
