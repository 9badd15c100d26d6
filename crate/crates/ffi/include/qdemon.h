#ifndef QDEMON_H
#define QDEMON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum QdStatus {
  QD_STATUS_OK = 0,
  QD_STATUS_NULL_POINTER = 1,
  QD_STATUS_INVALID_ARGUMENT = 2,
  QD_STATUS_CONFIG_ERROR = 3,
  QD_STATUS_CONTRACT_VIOLATION = 4,
  QD_STATUS_IO_ERROR = 5,
  QD_STATUS_OUT_OF_RANGE = 6,
  QD_STATUS_PANIC = 7,
} QdStatus;

/**
 * Run configuration handle.
 */
typedef struct QdConfig QdConfig;

/**
 * Simulated ensemble handle.
 */
typedef struct QdEnsemble QdEnsemble;

/**
 * One shot. Outcomes are 0 for g, 1 for e and −1 when the readout does not
 * exist in the protocol.
 */
typedef struct QdShot {
  int8_t x;
  int8_t k;
  int8_t y;
  int8_t z;
  /**
   * Extracted work E(x) − E(z) in units of ħω_q.
   */
  int8_t work;
  uint32_t n_jumps;
} QdShot;

/**
 * Ensemble statistics; `se_*` are bootstrap standard errors (zero for exact
 * summaries).
 */
typedef struct QdSummary {
  uint64_t n_shots;
  uint64_t n_iqc_excluded;
  double beta_eps;
  double avg_exp_bw_minus_ish;
  double avg_exp_bw_minus_iqc;
  double avg_exp_bw;
  double mean_iqc;
  double mean_ish;
  double mean_bw;
  double lambda_fb;
  double eta;
  double second_law_margin;
  double se_avg_exp_bw_minus_ish;
  double se_avg_exp_bw_minus_iqc;
  double se_avg_exp_bw;
  double se_mean_iqc;
  double se_mean_ish;
  double se_mean_bw;
  double se_eta;
  double se_second_law_margin;
} QdSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *qd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qd_version(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QdStatus qd_config_default(struct QdConfig **out);

/**
 * Configuration from a JSON document with the same schema as the CLI.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QdStatus qd_config_from_json(const char *json, struct QdConfig **out);

/**
 * Resolved configuration as JSON; release with [`qd_string_free`].
 *
 * # Safety
 * `config` must come from this library and `out` be a valid pointer.
 */
enum QdStatus qd_config_to_json(const struct QdConfig *config, char **out);

/**
 * # Safety
 * `config` must be valid.
 */
enum QdStatus qd_config_set_seed(struct QdConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be valid.
 */
enum QdStatus qd_config_set_shots(struct QdConfig *config, size_t n_shots);

/**
 * # Safety
 * `config` must be NULL or come from this library, and is invalid afterwards.
 */
void qd_config_free(struct QdConfig *config);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void qd_string_free(char *s);

/**
 * Simulates `n_shots` shots at the configured point with the configured seed.
 *
 * # Safety
 * `config` must be valid and `out` a valid pointer.
 */
enum QdStatus qd_ensemble_run(const struct QdConfig *config, struct QdEnsemble **out);

/**
 * Number of shots, or 0 for NULL.
 *
 * # Safety
 * `ensemble` must be NULL or valid.
 */
size_t qd_ensemble_len(const struct QdEnsemble *ensemble);

/**
 * # Safety
 * `ensemble` must be valid and `out` a valid pointer.
 */
enum QdStatus qd_ensemble_get(const struct QdEnsemble *ensemble, size_t index, struct QdShot *out);

/**
 * # Safety
 * `ensemble` must be NULL or come from this library, and is invalid afterwards.
 */
void qd_ensemble_free(struct QdEnsemble *ensemble);

/**
 * Statistics of `ensemble` using the β source, bootstrap count and minimum
 * cell count of `config`.
 *
 * # Safety
 * `config` and `ensemble` must be valid and `out` a valid pointer.
 */
enum QdStatus qd_ensemble_summary(const struct QdConfig *config,
                                  const struct QdEnsemble *ensemble,
                                  struct QdSummary *out);

/**
 * Exact expectations from the population oracle at the configured point.
 *
 * # Safety
 * `config` must be valid and `out` a valid pointer.
 */
enum QdStatus qd_exact_summary(const struct QdConfig *config, struct QdSummary *out);

/**
 * Closed-form probability of absolutely irreversible reversed events.
 * `p_k_e` and `p_y_e` are the probabilities of reading e in k and y.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QdStatus qd_lambda_fb_theory(double beta_eps,
                                  double e_given_g,
                                  double g_given_e,
                                  double p_k_e,
                                  double p_y_e,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDEMON_H */
