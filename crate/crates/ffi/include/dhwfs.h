/* C interface to the dhwfs wavefront-sensing library. Generated by cbindgen; do not edit. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible call. `Ok` is zero; everything else
// carries a category, with the detail text available from
// [`dhwfs_last_error`].
typedef enum DhwfsStatus {
  DHWFS_STATUS_OK = 0,
  DHWFS_STATUS_NULL_ARGUMENT = 1,
  DHWFS_STATUS_INVALID_UTF8 = 2,
  DHWFS_STATUS_CONFIG = 3,
  DHWFS_STATUS_INVALID_ARGUMENT = 4,
  DHWFS_STATUS_DIMENSION = 5,
  DHWFS_STATUS_DEGENERATE_INPUT = 6,
  DHWFS_STATUS_DEGENERATE_FIT = 7,
  DHWFS_STATUS_FORMAT = 8,
  DHWFS_STATUS_IO = 9,
  DHWFS_STATUS_PANIC = 10,
} DhwfsStatus;

// Opaque configuration handle; a validated set of simulation and
// reconstruction parameters.
typedef struct DhwfsConfig DhwfsConfig;

// Opaque streaming reconstructor handle.
typedef struct DhwfsReconstructor DhwfsReconstructor;

// Opaque frame-stream synthesizer handle.
typedef struct DhwfsSimulator DhwfsSimulator;

// Opaque Strehl-ratio evaluator handle.
typedef struct DhwfsStrehlMeter DhwfsStrehlMeter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dhwfs_version(void);

// Copy the current thread's last error message into `buf` (truncated to
// `cap - 1` bytes, always NUL-terminated). Returns the full message length
// in bytes, or 0 when there is no pending message. `buf` may be null when
// `cap` is 0.
size_t dhwfs_last_error(char *buf, size_t cap);

// New configuration with default parameters. Never fails.
struct DhwfsConfig *dhwfs_config_new(void);

// Set one configuration key from its text form, e.g.
// `dhwfs_config_set(cfg, "n", "128")`. Keys and accepted values match the
// CLI flags and `key = value` config-file lines.
enum DhwfsStatus dhwfs_config_set(struct DhwfsConfig *cfg, const char *key, const char *value);

// Grid side length of the configuration, or 0 for a null handle.
size_t dhwfs_config_n(const struct DhwfsConfig *cfg);

void dhwfs_config_free(struct DhwfsConfig *cfg);

// New simulator for the configuration and seed, or null on invalid
// configuration (see [`dhwfs_last_error`]).
struct DhwfsSimulator *dhwfs_simulator_new(const struct DhwfsConfig *cfg, uint64_t seed);

// Synthesize the next frame. `measurement_out` receives `2 n^2` doubles
// (interleaved re,im, row-major); `phase_out` receives the `n^2` true
// phase samples and may be null when the truth is not needed. `len` is
// the element count of `measurement_out`.
enum DhwfsStatus dhwfs_simulator_next_frame(struct DhwfsSimulator *sim,
                                            double *measurement_out,
                                            size_t len,
                                            double *phase_out);

void dhwfs_simulator_free(struct DhwfsSimulator *sim);

// New streaming reconstructor, or null on invalid configuration.
struct DhwfsReconstructor *dhwfs_reconstructor_new(const struct DhwfsConfig *cfg);

// Feed one raw measurement frame (`2 n^2` interleaved doubles) and run the
// per-frame update.
enum DhwfsStatus dhwfs_reconstructor_process_frame(struct DhwfsReconstructor *rec,
                                                   const double *measurement,
                                                   size_t len);

// Copy the current phase estimate (`n^2` doubles, radians, row-major).
enum DhwfsStatus dhwfs_reconstructor_phase(const struct DhwfsReconstructor *rec,
                                           double *out,
                                           size_t len);

// Copy the current reflectance estimate (`n^2` doubles, row-major).
enum DhwfsStatus dhwfs_reconstructor_reflectance(const struct DhwfsReconstructor *rec,
                                                 double *out,
                                                 size_t len);

// Frames consumed so far, or 0 for a null handle.
uint64_t dhwfs_reconstructor_frame_index(const struct DhwfsReconstructor *rec);

// Total 2-D transforms applied since construction or reset, or 0 for a
// null handle.
uint64_t dhwfs_reconstructor_transform_count(const struct DhwfsReconstructor *rec);

// Reset to the cold-start state and zero the transform counter.
enum DhwfsStatus dhwfs_reconstructor_reset(struct DhwfsReconstructor *rec);

void dhwfs_reconstructor_free(struct DhwfsReconstructor *rec);

// New Strehl evaluator over a centered circular aperture of the given
// diameter in pixels (pass `n` for the full-width aperture), or null on
// invalid arguments.
struct DhwfsStrehlMeter *dhwfs_strehl_meter_new(size_t n, double aperture_diameter_px);

// Peak Strehl ratio of the wrapped residual between two phase maps
// (`n^2` doubles each); writes the ratio to `out`.
enum DhwfsStatus dhwfs_strehl(const struct DhwfsStrehlMeter *meter,
                              const double *phi_hat,
                              const double *phi_true,
                              size_t len,
                              double *out);

void dhwfs_strehl_meter_free(struct DhwfsStrehlMeter *meter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
