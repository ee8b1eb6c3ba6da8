#ifndef PROCTOR_H
#define PROCTOR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ProctorStatus {
  PROCTOR_STATUS_OK = 0,
  PROCTOR_STATUS_NULL_POINTER = 1,
  PROCTOR_STATUS_INVALID_UTF8 = 2,
  PROCTOR_STATUS_IO = 3,
  PROCTOR_STATUS_PARSE = 4,
  PROCTOR_STATUS_VALIDATION = 5,
  PROCTOR_STATUS_CONFIG = 6,
  PROCTOR_STATUS_REGISTRATION_FAILED = 7,
  PROCTOR_STATUS_USAGE = 8,
  PROCTOR_STATUS_OUT_OF_RANGE = 9,
  PROCTOR_STATUS_PANIC = 10,
} ProctorStatus;

typedef enum ProctorLabel {
  PROCTOR_LABEL_CLEAN = 0,
  PROCTOR_LABEL_SUSPICIOUS = 1,
} ProctorLabel;

typedef enum ProctorEventKind {
  PROCTOR_EVENT_KIND_ANOTHER_PERSON = 0,
  PROCTOR_EVENT_KIND_DEVICE = 1,
  PROCTOR_EVENT_KIND_ABSENCE = 2,
} ProctorEventKind;

// Streaming analyzer fed one JSON record line at a time.
typedef struct ProctorAnalyzer ProctorAnalyzer;

// Engine thresholds.
typedef struct ProctorConfig ProctorConfig;

// Finished analysis.
typedef struct ProctorReport ProctorReport;

typedef struct ProctorFieldSummary {
  enum ProctorLabel label;
  size_t interval_count;
  // NaN for fields without a supporting ratio.
  double supporting_ratio;
} ProctorFieldSummary;

typedef struct ProctorInterval {
  enum ProctorEventKind kind;
  double start_sec;
  double end_sec;
} ProctorInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string.
const char *proctor_version(void);

// Message for the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *proctor_last_error(void);

// Default configuration.
//
// # Safety
// `out` must be a valid pointer.
enum ProctorStatus proctor_config_new(struct ProctorConfig **out);

// Configuration read from a `key = value` file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ProctorStatus proctor_config_from_file(const char *path, struct ProctorConfig **out);

// Sets one key; `value` uses the config file syntax (`0.5`, `true`).
//
// # Safety
// `cfg` must come from this library; `key` and `value` must be
// NUL-terminated strings.
enum ProctorStatus proctor_config_set(struct ProctorConfig *cfg,
                                      const char *key,
                                      const char *value);

// # Safety
// `cfg` must come from this library or be NULL.
void proctor_config_free(struct ProctorConfig *cfg);

// New analyzer using a copy of `cfg` (NULL for defaults).
//
// # Safety
// `cfg` must come from this library or be NULL; `out` must be valid.
enum ProctorStatus proctor_analyzer_new(const struct ProctorConfig *cfg,
                                        bool keep_per_frame,
                                        struct ProctorAnalyzer **out);

// Feeds one frame record (a JSON object). Blank lines are ignored. After a
// failure the analyzer should be discarded.
//
// # Safety
// `analyzer` must come from this library; `json` must be a NUL-terminated
// string.
enum ProctorStatus proctor_analyzer_push_json(struct ProctorAnalyzer *analyzer, const char *json);

// Finishes the stream. The analyzer is consumed whatever the outcome and
// must not be used or freed afterwards.
//
// # Safety
// `analyzer` must come from this library; `out` must be valid.
enum ProctorStatus proctor_analyzer_finish(struct ProctorAnalyzer *analyzer,
                                           struct ProctorReport **out);

// # Safety
// `analyzer` must come from this library or be NULL.
void proctor_analyzer_free(struct ProctorAnalyzer *analyzer);

// Analyzes a JSON-lines record file.
//
// # Safety
// `path` must be a NUL-terminated string, `cfg` from this library or NULL,
// `out` valid.
enum ProctorStatus proctor_analyze_file(const char *path,
                                        const struct ProctorConfig *cfg,
                                        bool keep_per_frame,
                                        struct ProctorReport **out);

// # Safety
// `report` must come from this library; `out` must be valid.
enum ProctorStatus proctor_report_overall(const struct ProctorReport *report,
                                          enum ProctorLabel *out);

// # Safety
// `report` must come from this library; `out` must be valid.
enum ProctorStatus proctor_report_frame_count(const struct ProctorReport *report, size_t *out);

// # Safety
// `report` must come from this library; `out` must be valid.
enum ProctorStatus proctor_report_field(const struct ProctorReport *report,
                                        enum ProctorEventKind kind,
                                        struct ProctorFieldSummary *out);

// Interval `index` of one field, in time order.
//
// # Safety
// `report` must come from this library; `out` must be valid.
enum ProctorStatus proctor_report_interval(const struct ProctorReport *report,
                                           enum ProctorEventKind kind,
                                           size_t index,
                                           struct ProctorInterval *out);

// Report as JSON (same document `proctor analyze` writes). Release the
// string with [`proctor_string_free`].
//
// # Safety
// `report` must come from this library; `out` must be valid.
enum ProctorStatus proctor_report_to_json(const struct ProctorReport *report, char **out);

// # Safety
// `s` must come from this library or be NULL.
void proctor_string_free(char *s);

// # Safety
// `report` must come from this library or be NULL.
void proctor_report_free(struct ProctorReport *report);

// Partial-face distance between a registered and an observed encoding;
// components of `observed` with magnitude below `eps` are skipped. Both
// arrays hold `len` doubles and `len` must be 128.
//
// # Safety
// `registered` and `observed` must point to `len` doubles; `out` must be
// valid.
enum ProctorStatus proctor_masked_distance(const double *registered,
                                           const double *observed,
                                           size_t len,
                                           double eps,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROCTOR_H */
