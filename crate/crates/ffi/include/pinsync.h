#ifndef PINSYNC_H
#define PINSYNC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PinsyncStatus {
  PINSYNC_STATUS_OK = 0,
  PINSYNC_STATUS_NULL_POINTER = 1,
  PINSYNC_STATUS_INVALID_UTF8 = 2,
  PINSYNC_STATUS_CONFIG = 3,
  PINSYNC_STATUS_INVALID_ARGUMENT = 4,
  PINSYNC_STATUS_SIMULATION = 5,
  PINSYNC_STATUS_IO = 6,
  PINSYNC_STATUS_OUT_OF_RANGE = 7,
  PINSYNC_STATUS_UNAVAILABLE = 8,
  PINSYNC_STATUS_PANIC = 9,
} PinsyncStatus;

typedef struct PinsyncCertificate PinsyncCertificate;

typedef struct PinsyncConfig PinsyncConfig;

typedef struct PinsyncTrial PinsyncTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *pinsync_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pinsync_version(void);

enum PinsyncStatus pinsync_config_load(const char *path, struct PinsyncConfig **out);

enum PinsyncStatus pinsync_config_from_str(const char *text, struct PinsyncConfig **out);

void pinsync_config_free(struct PinsyncConfig *config);

/**
 * Switches the triggering rule: "cont-state", "cont-exp", "disc-state" or
 * "disc-exp".
 */
enum PinsyncStatus pinsync_config_set_rule(struct PinsyncConfig *config, const char *rule);

size_t pinsync_config_nodes(const struct PinsyncConfig *config);

size_t pinsync_config_dimension(const struct PinsyncConfig *config);

/**
 * Hex SHA-256 of the canonical config, owned by the handle.
 */
const char *pinsync_config_digest(const struct PinsyncConfig *config);

enum PinsyncStatus pinsync_check(const struct PinsyncConfig *config,
                                 struct PinsyncCertificate **out);

void pinsync_certificate_free(struct PinsyncCertificate *cert);

bool pinsync_certificate_feasible(const struct PinsyncCertificate *cert);

size_t pinsync_certificate_mode_count(const struct PinsyncCertificate *cert);

/**
 * Largest eigenvalue of mode `mode`'s condition matrix (0-based index).
 */
enum PinsyncStatus pinsync_certificate_margin(const struct PinsyncCertificate *cert,
                                              size_t mode,
                                              double *out);

enum PinsyncStatus pinsync_certificate_lambda_bounds(const struct PinsyncCertificate *cert,
                                                     double *lo,
                                                     double *hi);

enum PinsyncStatus pinsync_certificate_threshold(const struct PinsyncCertificate *cert,
                                                 double *out);

enum PinsyncStatus pinsync_run_trial(const struct PinsyncConfig *config,
                                     uint64_t seed,
                                     struct PinsyncTrial **out);

void pinsync_trial_free(struct PinsyncTrial *trial);

/**
 * Number of recorded samples.
 */
size_t pinsync_trial_sample_count(const struct PinsyncTrial *trial);

/**
 * Total events of every cause.
 */
size_t pinsync_trial_event_count(const struct PinsyncTrial *trial);

size_t pinsync_trial_rule_violations(const struct PinsyncTrial *trial);

/**
 * `t` and `V(t)` of recorded sample `index`.
 */
enum PinsyncStatus pinsync_trial_lyapunov(const struct PinsyncTrial *trial,
                                          size_t index,
                                          double *t,
                                          double *v);

/**
 * `max_i ‖x_i − s‖²` at recorded sample `index`.
 */
enum PinsyncStatus pinsync_trial_max_sq_error(const struct PinsyncTrial *trial,
                                              size_t index,
                                              double *out);

/**
 * Writes `trajectory.csv`, `events.csv` and `modes.csv` into `dir`.
 */
enum PinsyncStatus pinsync_trial_write_csv(const struct PinsyncTrial *trial, const char *dir);

enum PinsyncStatus pinsync_zeno_lower_bound(size_t nodes,
                                            double lipschitz,
                                            double coupling,
                                            double pinning_gain,
                                            double a,
                                            double b,
                                            double *out);

enum PinsyncStatus pinsync_threshold_coefficient(double beta,
                                                 double lambda_lo,
                                                 double lambda_hi,
                                                 double delta,
                                                 double coupling,
                                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINSYNC_H */
