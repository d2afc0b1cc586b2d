#ifndef EGOVQA_H
#define EGOVQA_H

/* Generated by cbindgen from egovqa-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum EgoStatus {
  EGO_STATUS_OK = 0,
  EGO_STATUS_NULL_ARGUMENT = 1,
  EGO_STATUS_INVALID_UTF8 = 2,
  EGO_STATUS_INVALID_ARGUMENT = 3,
  EGO_STATUS_IO = 4,
  EGO_STATUS_PARSE = 5,
  EGO_STATUS_INTERNAL = 6,
} EgoStatus;

/**
 * Assertion store behind an opaque pointer.
 */
typedef struct EgoStore EgoStore;

/**
 * Temporal subsampling decision for one video.
 */
typedef struct EgoTemporalPlan {
  /**
   * Playback acceleration factor; 1 means no subsampling.
   */
  uint32_t divisor;
  /**
   * Video length in seconds after subsampling, floored at 1.
   */
  double effective_duration_s;
} EgoTemporalPlan;

/**
 * Closed time window in seconds.
 */
typedef struct EgoTimeInterval {
  double start;
  double end;
} EgoTimeInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never freed by the caller.
 */
const char *egovqa_version(void);

/**
 * Message from the last failing call on this thread, or null. Owned by
 * the library; valid until the next failing call.
 */
const char *egovqa_last_error_message(void);

/**
 * Releases a string returned through an out-parameter. Null is a no-op.
 *
 * # Safety
 * `s` must have come from this library and not already be freed.
 */
void egovqa_string_free(char *s);

/**
 * Ingests an assertion dump (TSV, optionally gzipped), fits the weight
 * transform, and returns a normalized store. `n_quantiles` of 0 selects
 * the default landmark count.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out_store` must be a
 * valid pointer.
 */
enum EgoStatus egovqa_store_ingest(const char *dump_path,
                                   const char *language,
                                   size_t n_quantiles,
                                   struct EgoStore **out_store);

/**
 * Opens a store file previously written by `egovqa_store_save` (or the
 * CLI `ingest` command).
 *
 * # Safety
 * `path` must be null or NUL-terminated; `out_store` must be valid.
 */
enum EgoStatus egovqa_store_open(const char *path, struct EgoStore **out_store);

/**
 * Writes the store to `path` in the line-delimited store format.
 *
 * # Safety
 * `store` must be a live handle; `path` null or NUL-terminated.
 */
enum EgoStatus egovqa_store_save(const struct EgoStore *store, const char *path);

/**
 * Number of assertions held by the store; 0 for a null handle.
 *
 * # Safety
 * `store` must be null or a live handle.
 */
uint64_t egovqa_store_assertion_count(const struct EgoStore *store);

/**
 * Releases a store handle. Null is a no-op.
 *
 * # Safety
 * `store` must have come from this library and not already be freed.
 */
void egovqa_store_free(struct EgoStore *store);

/**
 * Builds the knowledge graph rooted at `root` (a concept URI or a bare
 * label in the store's language), ranks its rendered paths against the
 * built-in reference sentences, and returns the kept paths as a JSON
 * array of `{"root", "text", "score"}` objects. A `depth` of 0 and a
 * `max_paths` of 0 select the defaults.
 *
 * # Safety
 * `store` must be a live handle; `root` null or NUL-terminated;
 * `out_json` valid.
 */
enum EgoStatus egovqa_store_paths_json(const struct EgoStore *store,
                                       const char *root,
                                       size_t depth,
                                       double threshold,
                                       size_t max_paths,
                                       char **out_json);

/**
 * Total scene-graph check: the number of rule violations in `raw`
 * (0 means the text is a valid graph), or -1 on a bad argument.
 *
 * # Safety
 * `raw` must be null or NUL-terminated.
 */
int64_t egovqa_scene_violation_count(const char *raw);

/**
 * Parses `raw` and returns a JSON report:
 * `{"parsed": bool, "violations": [{"rule", "element", "message"}]}`.
 *
 * # Safety
 * `raw` must be null or NUL-terminated; `out_json` valid.
 */
enum EgoStatus egovqa_scene_diagnostics_json(const char *raw, char **out_json);

/**
 * Tiles `duration_s` into processing segments and returns them as a
 * JSON array of `{"index", "start_s", "end_s"}` objects.
 *
 * # Safety
 * `out_json` must be valid.
 */
enum EgoStatus egovqa_plan_segments_json(double duration_s, char **out_json);

/**
 * Temporal subsampling plan for a video of `duration_s` seconds. Total:
 * nonpositive durations get the identity plan.
 */
struct EgoTemporalPlan egovqa_temporal_divisor(double duration_s);

/**
 * Look-back window ending at `t`, clamped at zero.
 */
struct EgoTimeInterval egovqa_gaze_window(double t);

/**
 * Extracts a multiple-choice answer from a model response.
 * `options_json` is a JSON array of the choice texts. Returns the
 * 0-based choice index, -1 for an abstention, or -2 on a bad argument.
 *
 * # Safety
 * Both arguments must be null or NUL-terminated.
 */
int32_t egovqa_extract_choice(const char *response, const char *options_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EGOVQA_H */
