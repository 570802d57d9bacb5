/* Copyright 2026 The Altar Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the experiment tracking service and its clients.
 *
 * Every function returns an altar_status. On failure a message is available
 * from altar_last_error_message() on the calling thread until the next call.
 * Strings returned through `char**` are owned by the caller and released
 * with altar_string_free(). Handles are opaque and not copyable.
 */

#ifndef ALTAR_ALTAR_H_
#define ALTAR_ALTAR_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ALTAR_API __declspec(dllexport)
#else
#define ALTAR_API __attribute__((visibility("default")))
#endif

typedef enum altar_status {
  ALTAR_OK = 0,
  ALTAR_E_INVALID_ARGUMENT = 1,
  ALTAR_E_KEY_INVALID = 2,
  ALTAR_E_DEPTH_EXCEEDED = 3,
  ALTAR_E_NON_FINITE_NUMBER = 4,
  ALTAR_E_ILLEGAL_TRANSITION = 5,
  ALTAR_E_NOT_FOUND = 6,
  ALTAR_E_IMMUTABLE_RECORD = 7,
  ALTAR_E_CONFLICT = 8,
  ALTAR_E_NON_MONOTONIC_STEP = 9,
  ALTAR_E_LIMIT_EXCEEDED = 10,
  ALTAR_E_FILTER_INVALID = 11,
  ALTAR_E_CORRUPT_JOURNAL = 12,
  ALTAR_E_LOCK_HELD = 13,
  ALTAR_E_STORAGE_FULL = 14,
  ALTAR_E_IO_FAILURE = 15,
  ALTAR_E_HASH_MISMATCH = 16,
  ALTAR_E_UNAUTHORIZED = 17,
  ALTAR_E_CONFIG_PARSE_ERROR = 18,
  ALTAR_E_EMPTY_FOLDER = 19,
  ALTAR_E_METRIC_CSV_MALFORMED = 20,
  ALTAR_E_SERVER_UNREACHABLE = 21,
  ALTAR_E_UPLOAD_FAILED = 22,
  ALTAR_E_SYNTAX_ERROR = 23,
  ALTAR_E_CHECKSUM_MISMATCH = 24
} altar_status;

ALTAR_API const char* altar_version(void);
ALTAR_API const char* altar_status_name(altar_status status);
ALTAR_API const char* altar_last_error_message(void);
ALTAR_API void altar_string_free(char* s);

/* Service ---------------------------------------------------------------- */

typedef struct altar_service altar_service;

typedef struct altar_service_config {
  const char* listen_address;          /* "host:port"; port 0 picks one */
  const char* data_dir;
  uint64_t large_file_threshold_bytes; /* strictly larger goes to blobs */
  const char* auth_token;              /* NULL or "" disables auth */
  uint32_t heartbeat_stale_secs;
  uint64_t captured_out_cap_bytes;
  const char* ui_dir;                  /* NULL or "" serves no static files */
} altar_service_config;

ALTAR_API void altar_service_config_init(altar_service_config* config);

/* Opens the data directory; ALTAR_E_LOCK_HELD when another process owns it. */
ALTAR_API altar_status altar_service_create(const altar_service_config* config,
                                            altar_service** out);

/* Binds and serves on a background thread. */
ALTAR_API altar_status altar_service_start(altar_service* service, int* out_port);

/* Binds and serves on the calling thread until altar_service_stop(). */
ALTAR_API altar_status altar_service_run(altar_service* service);

/* Bound port, or -1 before binding. */
ALTAR_API int altar_service_port(const altar_service* service);

/* Safe to call from another thread or a signal-driven watcher. */
ALTAR_API altar_status altar_service_stop(altar_service* service);
ALTAR_API void altar_service_destroy(altar_service* service);

/* Offline maintenance; both fail with ALTAR_E_LOCK_HELD while a service owns
 * the data directory. */
ALTAR_API altar_status altar_store_scan_integrity(const char* data_dir, char** out_report_json);
ALTAR_API altar_status altar_store_compact(const char* data_dir);

/* Core model ------------------------------------------------------------- */

ALTAR_API altar_status altar_validate_config(const char* config_json, char** out_normalized_json);

/* [[path, value], ...] sorted by path. */
ALTAR_API altar_status altar_flatten_paths(const char* config_json, char** out_json);

/* Filter language -------------------------------------------------------- */

/* Canonical text on success; on ALTAR_E_SYNTAX_ERROR `out_error_offset`
 * (optional) receives the 1-based byte offset. */
ALTAR_API altar_status altar_filter_parse(const char* text, char** out_canonical,
                                          size_t* out_error_offset);

/* Server filter JSON, or "null" with *out_is_residual = 1. */
ALTAR_API altar_status altar_filter_compile(const char* text, char** out_filter_json,
                                            int* out_is_residual);

ALTAR_API altar_status altar_filter_evaluate(const char* text, const char* doc_json,
                                             int* out_match);

/* Clients ---------------------------------------------------------------- */

typedef struct altar_client altar_client;

/* `token` may be NULL. No connection is made until the first request. */
ALTAR_API altar_status altar_client_create(const char* server_url, const char* token,
                                           altar_client** out);
ALTAR_API void altar_client_destroy(altar_client* client);

/* IngestPlan as JSON, without contacting a server. */
ALTAR_API altar_status altar_sender_plan(const char* folder, const char* experiment_name,
                                         char** out_plan_json);

/* {"run_id": n} or {"skipped": n}. */
ALTAR_API altar_status altar_sender_ingest(altar_client* client, const char* folder,
                                           const char* experiment_name, char** out_result_json);

/* `format` is "jsonl" or "csv"; `out_path` NULL writes to stdout. */
ALTAR_API altar_status altar_extract_runs(altar_client* client, const char* filter_text,
                                          const char* format, const char* out_path,
                                          uint64_t* out_count);

ALTAR_API altar_status altar_extract_bundle(altar_client* client, const char* filter_text,
                                            const char* out_dir, char** out_manifest_path);

ALTAR_API altar_status altar_verify_bundle(const char* dir, size_t* out_files_checked);

#ifdef __cplusplus
}
#endif

#endif /* ALTAR_ALTAR_H_ */
