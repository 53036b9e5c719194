#ifndef PORTFOLIO_ANNEAL_H
#define PORTFOLIO_ANNEAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PA_OK 0

/**
 * A required pointer argument was null.
 */
#define PA_ERR_NULL 1

/**
 * Invalid input (bad parameters, malformed instance, size limits).
 */
#define PA_ERR_VALIDATION 2

/**
 * Runtime failure such as an unreadable file.
 */
#define PA_ERR_RUNTIME 3

/**
 * Output buffer length does not match the instance size.
 */
#define PA_ERR_BUFFER 4

/**
 * Time-to-solution is undefined because the success probability is zero.
 */
#define PA_ERR_UNDEFINED 5

/**
 * A Rust panic was caught at the boundary.
 */
#define PA_ERR_PANIC 6

/**
 * Opaque QUBO instance.
 */
typedef struct PaQubo PaQubo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next library call on this thread.
 */
const char *pa_last_error(void);

/**
 * Load an instance from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t pa_qubo_load(const char *path, struct PaQubo **out);

/**
 * Parse an instance from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
int32_t pa_qubo_from_json(const char *json, struct PaQubo **out);

/**
 * Generate instance `index` of size `n` from the default market model and
 * bucket map, ensemble seed `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t pa_qubo_generate(size_t n, size_t index, uint64_t seed, struct PaQubo **out);

/**
 * Release an instance. Null is ignored.
 *
 * # Safety
 * `q` must come from this library and not be used afterwards.
 */
void pa_qubo_free(struct PaQubo *q);

/**
 * Number of variables.
 *
 * # Safety
 * `q` must be a live handle; `out` must be writable.
 */
int32_t pa_qubo_n(const struct PaQubo *q, size_t *out);

/**
 * Serialize to JSON. Free the string with `pa_string_free`.
 *
 * # Safety
 * `q` must be a live handle; `out` must be writable.
 */
int32_t pa_qubo_to_json(const struct PaQubo *q, char **out);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void pa_string_free(char *s);

/**
 * Objective value of a selection.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `value_out` must be writable.
 */
int32_t pa_qubo_evaluate(const struct PaQubo *q,
                         const uint8_t *bits,
                         size_t len,
                         double *value_out);

/**
 * Exact minimum; ties resolve to the lexicographically smallest selection.
 * Sizes above `max_n` (0 selects the default cap) are rejected.
 *
 * # Safety
 * `bits_out` must hold `len` writable bytes; `value_out` must be writable.
 */
int32_t pa_solve_exact(const struct PaQubo *q,
                       size_t max_n,
                       uint8_t *bits_out,
                       size_t len,
                       double *value_out);

/**
 * Greedy descent on the Ising form.
 *
 * # Safety
 * `bits_out` must hold `len` writable bytes; `value_out` must be writable.
 */
int32_t pa_solve_greedy(const struct PaQubo *q, uint8_t *bits_out, size_t len, double *value_out);

/**
 * Genetic algorithm with default population settings.
 *
 * # Safety
 * `bits_out` must hold `len` writable bytes; `value_out` and `calls_out`
 * must be writable.
 */
int32_t pa_solve_ga(const struct PaQubo *q,
                    uint64_t seed,
                    size_t max_iterations,
                    bool greedy_seed,
                    uint8_t *bits_out,
                    size_t len,
                    double *value_out,
                    uint64_t *calls_out);

/**
 * Time to solution at confidence `alpha` for single-shot success
 * probability `p` and run time `t_run`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t pa_tts(double p, double alpha, double t_run, double *out);

/**
 * Build and validate the clique embedding of `n` variables on an `m x m`
 * Chimera graph with the given defective qubits; reports the chain length.
 *
 * # Safety
 * `defects` must point to `n_defects` readable ids (or be null when
 * `n_defects` is 0); `chain_length_out` must be writable.
 */
int32_t pa_embedding_validate(size_t n,
                              size_t m,
                              const size_t *defects,
                              size_t n_defects,
                              size_t *chain_length_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PORTFOLIO_ANNEAL_H */
