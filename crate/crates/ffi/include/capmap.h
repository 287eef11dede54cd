#ifndef CAPMAP_H
#define CAPMAP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CapmapStatus {
  CAPMAP_STATUS_OK = 0,
  CAPMAP_STATUS_NULL_ARG = 1,
  CAPMAP_STATUS_INVALID_UTF8 = 2,
  CAPMAP_STATUS_PARSE = 3,
  CAPMAP_STATUS_VALIDATION = 4,
  CAPMAP_STATUS_IO = 5,
  CAPMAP_STATUS_NO_PLAN = 6,
  CAPMAP_STATUS_BUDGET_EXCEEDED = 7,
  CAPMAP_STATUS_PANIC = 8,
} CapmapStatus;

/**
 * Opaque capability model.
 */
typedef struct CapmapModel CapmapModel;

/**
 * Opaque planning problem.
 */
typedef struct CapmapProblem CapmapProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *capmap_version(void);

/**
 * Message of the last failed call on this thread; empty after success.
 * Valid until the next call into this library on the same thread.
 */
const char *capmap_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void capmap_string_free(char *s);

/**
 * Parses a model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CapmapStatus capmap_model_from_json(const char *json, struct CapmapModel **out);

/**
 * Loads a model document from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CapmapStatus capmap_model_load(const char *path, struct CapmapModel **out);

/**
 * Builds a model from a JSON array of variable names and a JSON array of
 * `[from, to]` pairs, with every row set to beta(`a`, `b`).
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum CapmapStatus capmap_model_build(const char *agent,
                                     const char *vars_json,
                                     const char *edges_json,
                                     double a,
                                     double b,
                                     struct CapmapModel **out);

/**
 * Canonical JSON for a model. Free the result with
 * [`capmap_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum CapmapStatus capmap_model_to_json(const struct CapmapModel *model, char **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void capmap_model_free(struct CapmapModel *model);

/**
 * Probability of the capability in `spec_json` (`{"A":[..],"B":[..],"C":[..],"D":[..]}`).
 *
 * # Safety
 * `model` must be a live handle; `spec_json` NUL-terminated; `out` writable.
 */
enum CapmapStatus capmap_query(const struct CapmapModel *model, const char *spec_json, double *out);

/**
 * Learns from JSON-Lines traces and returns a new model; the input model
 * is left unchanged.
 *
 * # Safety
 * `model` must be a live handle; `traces_jsonl` NUL-terminated; `out`
 * writable.
 */
enum CapmapStatus capmap_learn(const struct CapmapModel *model,
                               const char *traces_jsonl,
                               size_t max_unknown,
                               struct CapmapModel **out);

/**
 * Loads a problem document; model paths resolve against its directory.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum CapmapStatus capmap_problem_load(const char *path, struct CapmapProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from this library, not yet freed.
 */
void capmap_problem_free(struct CapmapProblem *problem);

/**
 * Most probable linear plan as JSON.
 *
 * # Safety
 * `problem` must be a live handle; `out` writable.
 */
enum CapmapStatus capmap_plan(const struct CapmapProblem *problem, char **out);

/**
 * Conditional plan under a per-path request budget, as JSON. A zero
 * `max_depth` selects the default.
 *
 * # Safety
 * `problem` must be a live handle; `out` writable.
 */
enum CapmapStatus capmap_plan_conditional(const struct CapmapProblem *problem,
                                          uint32_t budget,
                                          uint32_t max_depth,
                                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAPMAP_H */
