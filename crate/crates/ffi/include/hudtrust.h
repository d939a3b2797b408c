#ifndef HUDTRUST_H
#define HUDTRUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HtStatus {
  HT_STATUS_OK = 0,
  HT_STATUS_NULL_POINTER = 1,
  HT_STATUS_INVALID_ARGUMENT = 2,
  HT_STATUS_PARSE_ERROR = 3,
  HT_STATUS_SIMULATION_ERROR = 4,
  HT_STATUS_FINISHED = 5,
  HT_STATUS_PANIC = 6,
} HtStatus;

/**
 * Opaque simulation handle.
 */
typedef struct HtSim HtSim;

/**
 * Ego and cue summary after one tick.
 */
typedef struct HtTick {
  double t;
  double ego_x;
  double ego_y;
  double ego_heading;
  double ego_speed;
  uint32_t omn_cues;
  uint32_t sel_cues;
  /**
   * Objects whose predicted collision lies inside the warning distance.
   */
  uint32_t warnings;
  uint32_t fired_events;
} HtTick;

typedef struct HtRgb {
  uint8_t r;
  uint8_t g;
  uint8_t b;
} HtRgb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ht_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ht_version(void);

/**
 * Creates a simulation of the bundled scenario.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HtStatus ht_sim_new_bundled(uint64_t seed, struct HtSim **out);

/**
 * Creates a simulation from scenario TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum HtStatus ht_sim_new_from_toml(const char *toml, uint64_t seed, struct HtSim **out);

/**
 * Frees a handle. NULL is ignored.
 *
 * # Safety
 * `sim` must come from one of the constructors and not be used afterwards.
 */
void ht_sim_free(struct HtSim *sim);

/**
 * Advances one tick. Returns `Finished` once the scenario has ended.
 *
 * # Safety
 * `sim` must be a live handle; `out` may be NULL.
 */
enum HtStatus ht_sim_step(struct HtSim *sim, struct HtTick *out);

/**
 * Steps until the end of the scenario and writes the tick count.
 *
 * # Safety
 * `sim` must be a live handle; `ticks` may be NULL.
 */
enum HtStatus ht_sim_run(struct HtSim *sim, uint64_t *ticks);

/**
 * Current state without stepping; cue counts are zero.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum HtStatus ht_sim_state(const struct HtSim *sim, struct HtTick *out);

/**
 * 1 when the scenario has ended, 0 otherwise or for NULL.
 *
 * # Safety
 * `sim` must be NULL or a live handle.
 */
int32_t ht_sim_finished(const struct HtSim *sim);

/**
 * Distance travelled during the reaction time plus the braking distance.
 *
 * # Safety
 * `out` must be writable.
 */
enum HtStatus ht_warning_distance(double speed, double reaction_time_s, double decel, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum HtStatus ht_hazard_severity(double distance, double d_warn, double *out);

/**
 * Green-to-red warning color for a severity in [0, 1].
 *
 * # Safety
 * `out` must be writable.
 */
enum HtStatus ht_color_code(double severity, double k, struct HtRgb *out);

/**
 * Zero-phase SCR band-pass with the default band and order at
 * `sample_rate` Hz. `out` receives `n` samples.
 *
 * # Safety
 * `x` must hold `n` readable values and `out` room for `n` values.
 */
enum HtStatus ht_bandpass_scr(const double *x, size_t n, double sample_rate, double *out);

/**
 * Two-sided Mann-Whitney U of `a` against `b`.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` values; `u` and `p` must be writable.
 */
enum HtStatus ht_mann_whitney_u(const double *a,
                                size_t na,
                                const double *b,
                                size_t nb,
                                double *u,
                                double *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HUDTRUST_H */
