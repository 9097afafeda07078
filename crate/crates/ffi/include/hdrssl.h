#ifndef HDRSSL_H
#define HDRSSL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HdrsslStatus {
  HDRSSL_STATUS_OK = 0,
  HDRSSL_STATUS_NULL_ARGUMENT = 1,
  HDRSSL_STATUS_INVALID_ARGUMENT = 2,
  HDRSSL_STATUS_CONFIG = 3,
  HDRSSL_STATUS_IO = 4,
  HDRSSL_STATUS_FORMAT = 5,
  /**
   * The run finished but produced no supervision pairs.
   */
  HDRSSL_STATUS_EMPTY = 6,
  HDRSSL_STATUS_PANIC = 7,
} HdrsslStatus;

/**
 * Subset a pair belongs to.
 */
typedef enum HdrsslSubset {
  HDRSSL_SUBSET_ED = 0,
  HDRSSL_SUBSET_EDM = 1,
  HDRSSL_SUBSET_MD = 2,
  HDRSSL_SUBSET_MDM = 3,
} HdrsslSubset;

typedef struct HdrsslConfig HdrsslConfig;

typedef struct HdrsslFlow HdrsslFlow;

typedef struct HdrsslStats HdrsslStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *hdrssl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hdrssl_version(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hdrssl_string_free(char *s);

/**
 * The default configuration.
 */
struct HdrsslConfig *hdrssl_config_new(void);

/**
 * Reads and validates a TOML config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HdrsslStatus hdrssl_config_load(const char *path, struct HdrsslConfig **out);

/**
 * Parses and validates config TOML held in memory.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HdrsslStatus hdrssl_config_from_toml(const char *text, struct HdrsslConfig **out);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum HdrsslStatus hdrssl_config_set_seed(struct HdrsslConfig *cfg, uint64_t seed);

/**
 * Worker threads for `hdrssl_generate`; 0 uses every core. Output does not
 * depend on this value.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum HdrsslStatus hdrssl_config_set_workers(struct HdrsslConfig *cfg, size_t workers);

/**
 * The config serialized as TOML; free with `hdrssl_string_free`. NULL if
 * `cfg` is NULL.
 *
 * # Safety
 * `cfg` must be NULL or a live config handle.
 */
char *hdrssl_config_to_toml(const struct HdrsslConfig *cfg);

/**
 * # Safety
 * `cfg` must be NULL or a live config handle; it is invalid afterwards.
 */
void hdrssl_config_free(struct HdrsslConfig *cfg);

/**
 * Runs the pipeline over every scene of `manifest` and writes pairs under
 * `out_dir`. Scenes that fail are skipped. Returns `HDRSSL_STATUS_EMPTY`
 * (and leaves `*out` untouched) when scenes were listed but no pair came out.
 * `out` may be NULL when the counts are not needed.
 *
 * # Safety
 * `cfg` must be live, the paths NUL-terminated, and `out` NULL or writable.
 */
enum HdrsslStatus hdrssl_generate(const struct HdrsslConfig *cfg,
                                  const char *manifest,
                                  const char *out_dir,
                                  struct HdrsslStats **out);

/**
 * Counts the pairs of a generated tree.
 *
 * # Safety
 * `root` must be NUL-terminated and `out` writable.
 */
enum HdrsslStatus hdrssl_stats_scan(const char *root, struct HdrsslStats **out);

/**
 * Total pair count; 0 for NULL.
 *
 * # Safety
 * `stats` must be NULL or a live stats handle.
 */
uint64_t hdrssl_stats_total(const struct HdrsslStats *stats);

/**
 * Pairs of one subset, restricted to `dataset` unless it is NULL.
 *
 * # Safety
 * `stats` must be NULL or live; `dataset` NULL or NUL-terminated.
 */
uint64_t hdrssl_stats_count(const struct HdrsslStats *stats,
                            const char *dataset,
                            enum HdrsslSubset subset);

/**
 * Number of datasets; their names are indexed in sorted order.
 *
 * # Safety
 * `stats` must be NULL or a live stats handle.
 */
size_t hdrssl_stats_dataset_count(const struct HdrsslStats *stats);

/**
 * Name of dataset `i`, owned by the handle; NULL when out of range.
 *
 * # Safety
 * `stats` must be NULL or a live stats handle.
 */
const char *hdrssl_stats_dataset_name(const struct HdrsslStats *stats, size_t i);

/**
 * Markdown table of subset percentages; free with `hdrssl_string_free`.
 *
 * # Safety
 * `stats` must be NULL or a live stats handle.
 */
char *hdrssl_stats_table(const struct HdrsslStats *stats);

/**
 * # Safety
 * `stats` must be NULL or a live stats handle; it is invalid afterwards.
 */
void hdrssl_stats_free(struct HdrsslStats *stats);

/**
 * Reads a Middlebury `.flo` file. NaN or huge components mark pixels invalid.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum HdrsslStatus hdrssl_flow_load(const char *path, struct HdrsslFlow **out);

/**
 * A flow of the given size with every pixel invalid.
 */
struct HdrsslFlow *hdrssl_flow_new(size_t width, size_t height);

/**
 * # Safety
 * `flow` must be NULL or a live flow handle.
 */
size_t hdrssl_flow_width(const struct HdrsslFlow *flow);

/**
 * # Safety
 * `flow` must be NULL or a live flow handle.
 */
size_t hdrssl_flow_height(const struct HdrsslFlow *flow);

/**
 * Displacement at `(x, y)`. `*valid` is false for untracked pixels, whose
 * `u`/`v` are meaningless.
 *
 * # Safety
 * `flow` must be live; `u`, `v` and `valid` writable.
 */
enum HdrsslStatus hdrssl_flow_get(const struct HdrsslFlow *flow,
                                  size_t x,
                                  size_t y,
                                  float *u,
                                  float *v,
                                  bool *valid);

/**
 * Stores a displacement and marks the pixel valid. Components must be finite.
 *
 * # Safety
 * `flow` must be a live flow handle.
 */
enum HdrsslStatus hdrssl_flow_set(struct HdrsslFlow *flow, size_t x, size_t y, float u, float v);

/**
 * Writes `.flo`; invalid pixels are stored as the unknown-flow sentinel.
 *
 * # Safety
 * `flow` must be live and `path` NUL-terminated.
 */
enum HdrsslStatus hdrssl_flow_write(const struct HdrsslFlow *flow, const char *path);

/**
 * # Safety
 * `flow` must be NULL or a live flow handle; it is invalid afterwards.
 */
void hdrssl_flow_free(struct HdrsslFlow *flow);

/**
 * PSNR after mu-law tonemapping of two interleaved RGB float images of
 * `width * height * 3` non-negative samples each. Identical inputs give 100.
 *
 * # Safety
 * `a` and `b` must each point to `width * height * 3` readable floats and
 * `out` must be writable.
 */
enum HdrsslStatus hdrssl_psnr_mu(const float *a,
                                 const float *b,
                                 size_t width,
                                 size_t height,
                                 float mu,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDRSSL_H */
