/* C interface to the transcription pipeline.
 *
 * Strings returned through `char**` out-parameters are heap allocated JSON
 * (or plain text where noted) and must be released with atrain_string_free.
 * On failure a function returns a nonzero status and atrain_last_error()
 * describes it; the message is thread-local and valid until the next call
 * on the same thread. */
#ifndef ATRAIN_H
#define ATRAIN_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ATRAIN_API __attribute__((visibility("default")))
#else
#define ATRAIN_API
#endif

typedef enum atrain_status {
  ATRAIN_OK = 0,
  ATRAIN_E_INVALID_ARGUMENT = 1,
  ATRAIN_E_FILE_NOT_FOUND = 2,
  ATRAIN_E_UNREADABLE_MEDIA = 3,
  ATRAIN_E_NO_AUDIO_STREAM = 4,
  ATRAIN_E_CONVERSION_FAILED = 5,
  ATRAIN_E_CONVERTER_NOT_FOUND = 6,
  ATRAIN_E_MODEL_NOT_INSTALLED = 7,
  ATRAIN_E_ENGINE_FAILURE = 8,
  ATRAIN_E_UNSUPPORTED_LANGUAGE = 9,
  ATRAIN_E_INVALID_CONFIG = 10,
  ATRAIN_E_DEVICE_UNAVAILABLE = 11,
  ATRAIN_E_JOB_NOT_FOUND = 12,
  ATRAIN_E_NETWORK_ATTEMPT_DENIED = 13,
  ATRAIN_E_CHECKSUM_MISMATCH = 14,
  ATRAIN_E_DOWNLOAD_FAILED = 15,
  ATRAIN_E_ZERO_DURATION = 16,
  ATRAIN_E_NEGATIVE_TIME = 17,
  ATRAIN_E_EMPTY_RESULTS = 18,
  ATRAIN_E_CANCELLED = 19,
  ATRAIN_E_IO = 20,
  ATRAIN_E_INTERNAL = 21,
  /* The job ran but ended FAILED; the record is still returned. */
  ATRAIN_E_JOB_FAILED = 22
} atrain_status;

typedef struct atrain_context atrain_context;

/* Receives one JSON object per job event. */
typedef void (*atrain_event_fn)(const char* event_json, void* user);
/* Download progress; total is 0 when unknown. */
typedef void (*atrain_progress_fn)(unsigned long long done, unsigned long long total, void* user);
/* One finished benchmark cell as JSON, with its position in the matrix. */
typedef void (*atrain_bench_fn)(const char* row_json, size_t done, size_t total, void* user);

ATRAIN_API const char* atrain_version(void);
ATRAIN_API const char* atrain_status_name(atrain_status status);
ATRAIN_API const char* atrain_last_error(void);
ATRAIN_API void atrain_string_free(char* s);

/* options_json: NULL or a JSON object of settings overrides, e.g.
 * {"data_dir": "...", "engine": "mock", "model_dir": "...", "device": "cpu"}.
 * Opening recovers jobs interrupted by an earlier process. */
ATRAIN_API atrain_status atrain_context_open(const char* options_json, atrain_context** out);
ATRAIN_API void atrain_context_close(atrain_context* ctx);
/* {"data_dir", "model_dir", "manifest", "engine", "recovered_jobs": [...]} */
ATRAIN_API atrain_status atrain_context_info(atrain_context* ctx, char** out_json);

/* config_json: {"input_path", "model", "language", "speakers", "device",
 * "translate", "gap_tolerance_s"}. Returns the CREATED record. */
ATRAIN_API atrain_status atrain_job_create(atrain_context* ctx, const char* config_json, char** out_record_json);
/* Runs a CREATED job on the calling thread. Returns ATRAIN_E_JOB_FAILED
 * (and the FAILED record) when the pipeline fails. */
ATRAIN_API atrain_status atrain_job_run(atrain_context* ctx, const char* job_id, atrain_event_fn on_event,
                                        void* user, char** out_record_json);
ATRAIN_API atrain_status atrain_job_list(atrain_context* ctx, char** out_json);
ATRAIN_API atrain_status atrain_job_get(atrain_context* ctx, const char* job_id, char** out_record_json);
ATRAIN_API atrain_status atrain_job_events(atrain_context* ctx, const char* job_id, char** out_json);
ATRAIN_API atrain_status atrain_job_delete(atrain_context* ctx, const char* job_id);

ATRAIN_API atrain_status atrain_models_list(atrain_context* ctx, char** out_json);
/* Downloads and verifies a model (network use is explicit here). */
ATRAIN_API atrain_status atrain_model_prefetch(atrain_context* ctx, const char* model_id, atrain_progress_fn progress,
                                               void* user, char** out_spec_json);

/* Starts the HTTP API and the background job worker. host NULL means
 * 127.0.0.1; port 0 picks a free port. static_dir may be NULL. */
ATRAIN_API atrain_status atrain_serve_start(atrain_context* ctx, const char* host, int port, const char* static_dir,
                                            int* out_port);
ATRAIN_API atrain_status atrain_serve_stop(atrain_context* ctx);

/* options_json: {"corpus": dir or [files], "models": [ids], "device": "cpu",
 * "reps": 1, "out": "results.csv", "machine_label": "...", "work_dir": "..."} */
ATRAIN_API atrain_status atrain_bench_run(atrain_context* ctx, const char* options_json, atrain_bench_fn on_row,
                                          void* user, char** out_results_json);
/* {"markdown", "plot", "flags": [...]} from a results CSV file. */
ATRAIN_API atrain_status atrain_bench_report(const char* csv_path, char** out_report_json);

ATRAIN_API atrain_status atrain_probe_media(atrain_context* ctx, const char* path, char** out_json);
ATRAIN_API atrain_status atrain_compute_rpt(double processing_time_s, double duration_s, double* out_rpt);
/* Plain text "HH:MM:SS.t". */
ATRAIN_API atrain_status atrain_format_timestamp(double seconds, char** out_text);

#ifdef __cplusplus
}
#endif

#endif
