/* C interface to the polylab experiments. Handles are opaque; strings returned
 * by the library stay valid until the owning handle is destroyed or, for the
 * context, until its next call. */
#ifndef POLYLAB_H
#define POLYLAB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define POLYLAB_API __attribute__((visibility("default")))
#else
#define POLYLAB_API
#endif

typedef enum polylab_status {
  POLYLAB_OK = 0,
  POLYLAB_USAGE = 1,
  POLYLAB_SINGULAR_POINT = 2,
  POLYLAB_PERTURBATION_FAILED = 3,
  POLYLAB_BISECTION_NOT_FOUND = 4,
  POLYLAB_CONTAINED_IN_VARIETY = 5,
  POLYLAB_SINGULAR_ONLY = 6,
  POLYLAB_PARSE = 7,
  POLYLAB_IO = 8,
  POLYLAB_INTERNAL = 9,
  POLYLAB_INVALID_ARGUMENT = 10
} polylab_status;

typedef struct polylab_context polylab_context;
typedef struct polylab_report polylab_report;

POLYLAB_API const char* polylab_version(void);
POLYLAB_API const char* polylab_status_name(polylab_status s);

/* jobs: worker budget handed to the modules, at least 1. */
POLYLAB_API polylab_status polylab_context_create(int jobs, polylab_context** out);
POLYLAB_API void polylab_context_destroy(polylab_context* ctx);

/* Message of the last failed call on ctx, "" after a success. */
POLYLAB_API const char* polylab_last_error(const polylab_context* ctx);
/* {"error": {"code", "name", "message"}} for the last failed call, "" after a success. */
POLYLAB_API const char* polylab_last_error_json(const polylab_context* ctx);

/* JSON array of experiment kinds. */
POLYLAB_API const char* polylab_experiments(polylab_context* ctx);
/* Default config of `kind` as JSON, or NULL on error. */
POLYLAB_API const char* polylab_default_config(polylab_context* ctx, const char* kind);

/* Runs `kind` with config_json overlaid on the defaults (NULL or "" for none). */
POLYLAB_API polylab_status polylab_run(polylab_context* ctx, const char* kind, const char* config_json,
                                       polylab_report** out);
/* Reruns the config embedded in report_json, with overrides_json (may be NULL)
 * applied, and diffs the rows. */
POLYLAB_API polylab_status polylab_replay(polylab_context* ctx, const char* report_json,
                                          const char* overrides_json, polylab_report** out);

POLYLAB_API const char* polylab_report_json(const polylab_report* r);
/* 1 when every gate passed (run) or no row differs (replay). */
POLYLAB_API int polylab_report_passed(const polylab_report* r);
/* Rows that differ in a replay report, 0 for a run report. */
POLYLAB_API long long polylab_report_diffs(const polylab_report* r);
POLYLAB_API int polylab_report_is_replay(const polylab_report* r);
POLYLAB_API void polylab_report_destroy(polylab_report* r);

#ifdef __cplusplus
}
#endif

#endif
