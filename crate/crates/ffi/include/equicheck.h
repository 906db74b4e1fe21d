#ifndef EQUICHECK_H
#define EQUICHECK_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EqcStatus {
  EQC_STATUS_OK = 0,
  EQC_STATUS_NULL_POINTER = 1,
  EQC_STATUS_INVALID_ARGUMENT = 2,
  EQC_STATUS_SHAPE = 3,
  EQC_STATUS_CONFIG = 4,
  EQC_STATUS_UNSUPPORTED = 5,
  EQC_STATUS_PANIC = 6,
} EqcStatus;

/**
 * Opaque network handle.
 */
typedef struct EqcNetwork EqcNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *eqc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eqc_version(void);

/**
 * Output side `⌊(i + 2p - k) / s⌋ + 1` of a window layer.
 *
 * # Safety
 * `out` must be a valid pointer to a `size_t`.
 */
enum EqcStatus eqc_output_size(size_t i, size_t k, size_t s, size_t p, size_t *out);

/**
 * Whether a window layer is exact: `(i + 2p - k) mod s == 0`.
 *
 * # Safety
 * `out` must be a valid pointer to a `bool`.
 */
enum EqcStatus eqc_check_layer(size_t i, size_t k, size_t s, size_t p, bool *out);

/**
 * Brute-force rotation commutation verdict for an unpadded window layer.
 *
 * # Safety
 * `out` must be a valid pointer to a `bool`.
 */
enum EqcStatus eqc_rotation_commutation(size_t i, size_t k, size_t s, bool *out);

/**
 * Brute-force mirror commutation verdict for an unpadded window layer.
 *
 * # Safety
 * `out` must be a valid pointer to a `bool`.
 */
enum EqcStatus eqc_mirror_commutation(size_t i, size_t k, size_t s, bool *out);

/**
 * Builds a built-in network (`toy41`, `p4cnn`, `z2cnn`, `fig1-maxpool`) with
 * weights drawn from `seed`. `input_size` 0 keeps the built-in's size.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` a valid pointer.
 */
enum EqcStatus eqc_network_from_builtin(const char *name,
                                        size_t input_size,
                                        uint64_t seed,
                                        bool integer_valued,
                                        struct EqcNetwork **out);

/**
 * Builds a network from a JSON architecture config.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum EqcStatus eqc_network_from_json(const char *json,
                                     size_t input_size,
                                     uint64_t seed,
                                     bool integer_valued,
                                     struct EqcNetwork **out);

/**
 * Releases a network handle. NULL is ignored.
 *
 * # Safety
 * `net` must come from `eqc_network_from_*` and not be used afterwards.
 */
void eqc_network_free(struct EqcNetwork *net);

/**
 * Whether every strided layer of the network satisfies the exactness
 * condition at its input size.
 *
 * # Safety
 * `net` must be a live handle; `out` a valid pointer.
 */
enum EqcStatus eqc_network_is_exact(const struct EqcNetwork *net, bool *out);

/**
 * Full analysis report as JSON. Free the string with `eqc_string_free`.
 *
 * # Safety
 * `net` must be a live handle; `out` a valid pointer.
 */
enum EqcStatus eqc_network_analysis_json(const struct EqcNetwork *net, char **out);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void eqc_string_free(char *s);

/**
 * Side length of the square input the network expects.
 *
 * # Safety
 * `net` must be a live handle; `out` a valid pointer.
 */
enum EqcStatus eqc_network_input_size(const struct EqcNetwork *net, size_t *out);

/**
 * Number of values in the network's final output.
 *
 * # Safety
 * `net` must be a live handle; `out` a valid pointer.
 */
enum EqcStatus eqc_network_output_len(const struct EqcNetwork *net, size_t *out);

/**
 * Runs the network on a `(channels, side, side)` row-major input and writes
 * the flattened final activation into `output`.
 *
 * # Safety
 * `input` must point to `input_len` doubles and `output` to `output_len`.
 */
enum EqcStatus eqc_network_forward(const struct EqcNetwork *net,
                                   const double *input,
                                   size_t input_len,
                                   double *output,
                                   size_t output_len);

/**
 * Largest per-depth equivariance error over every non-identity element of
 * the network's group, on an input drawn from `seed`.
 *
 * # Safety
 * `net` must be a live handle; `out` a valid pointer.
 */
enum EqcStatus eqc_network_max_equivariance_error(const struct EqcNetwork *net,
                                                  uint64_t seed,
                                                  double *out);

/**
 * Tolerance used for real-valued measurements.
 */
double eqc_real_tolerance(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUICHECK_H */
