#ifndef MCTSPO_H
#define MCTSPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MctspoStatus {
  MCTSPO_STATUS_OK = 0,
  MCTSPO_STATUS_NULL_POINTER = 1,
  MCTSPO_STATUS_INVALID_UTF8 = 2,
  MCTSPO_STATUS_DIMENSION_MISMATCH = 3,
  MCTSPO_STATUS_CONTRACT = 4,
  MCTSPO_STATUS_DEGENERATE_DIRECTION = 5,
  MCTSPO_STATUS_CANDIDATE_GENERATION_FAILED = 6,
  MCTSPO_STATUS_BUDGET_EXHAUSTED = 7,
  MCTSPO_STATUS_CONFIG = 8,
  MCTSPO_STATUS_IO = 9,
  MCTSPO_STATUS_PARSE = 10,
  MCTSPO_STATUS_OUT_OF_RANGE = 11,
  MCTSPO_STATUS_PANIC = 12,
} MctspoStatus;

/**
 * A search genome: network shape plus its action sequence.
 */
typedef struct MctspoGenome MctspoGenome;

/**
 * Result of one search or GA run.
 */
typedef struct MctspoRun MctspoRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or null. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *mctspo_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void mctspo_string_free(char *s);

/**
 * Loads a genome JSON file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MctspoStatus mctspo_genome_load(const char *path, struct MctspoGenome **out);

/**
 * Parses a genome from JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum MctspoStatus mctspo_genome_from_json(const char *json, struct MctspoGenome **out);

/**
 * Serializes a genome; free the string with [`mctspo_string_free`].
 *
 * # Safety
 * `genome` must be a live handle; `out` must be writable.
 */
enum MctspoStatus mctspo_genome_to_json(const struct MctspoGenome *genome, char **out);

/**
 * Number of actions in the genome; 0 for a null handle.
 *
 * # Safety
 * `genome` must be null or a live handle.
 */
size_t mctspo_genome_depth(const struct MctspoGenome *genome);

/**
 * # Safety
 * `genome` must be null or a handle from this library, not yet freed.
 */
void mctspo_genome_free(struct MctspoGenome *genome);

/**
 * Rolls the genome's policy out once. `env` is a task name
 * (`sparse-mountain-car`, `sparse-acrobot`) or a JSON task object.
 *
 * # Safety
 * `genome` must be a live handle, `env` a nul-terminated string, and the
 * out-pointers writable.
 */
enum MctspoStatus mctspo_replay(const struct MctspoGenome *genome,
                                const char *env,
                                double *out_return,
                                bool *out_reached_goal);

/**
 * Runs one trial in memory from an experiment config (JSON text). The
 * config's seed list and output directory are ignored; nothing is written.
 *
 * # Safety
 * `config_json` must be a nul-terminated string; `out` must be writable.
 */
enum MctspoStatus mctspo_run(const char *config_json, uint64_t seed, struct MctspoRun **out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum MctspoStatus mctspo_run_best_return(const struct MctspoRun *run, double *out);

/**
 * Environment calls the run consumed; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
uint64_t mctspo_run_env_calls(const struct MctspoRun *run);

/**
 * Number of learning-curve points; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t mctspo_run_curve_len(const struct MctspoRun *run);

/**
 * Reads curve point `index`.
 *
 * # Safety
 * `run` must be a live handle and the out-pointers writable.
 */
enum MctspoStatus mctspo_run_curve_point(const struct MctspoRun *run,
                                         size_t index,
                                         uint64_t *out_env_calls,
                                         double *out_best_return);

/**
 * Copies the run's best genome into a new handle.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum MctspoStatus mctspo_run_best_genome(const struct MctspoRun *run, struct MctspoGenome **out);

/**
 * # Safety
 * `run` must be null or a handle from this library, not yet freed.
 */
void mctspo_run_free(struct MctspoRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCTSPO_H */
