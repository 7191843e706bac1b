/********************************************************************************
* Copyright 2026 The edgefn Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

/*
 * C interface to the edgefn runtime.
 *
 * Conventions:
 *   - Every fallible call returns an edgefn_status; EDGEFN_OK is zero.
 *   - On failure, edgefn_last_error() returns a message for the calling
 *     thread until its next call into the library.
 *   - Strings returned through char** out-parameters are heap-allocated JSON
 *     or text owned by the caller and released with edgefn_string_free().
 *   - Objects are opaque handles created by a start or create call and
 *     released by the matching destroy call, which accepts NULL.
 */
#ifndef EDGEFN_H
#define EDGEFN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EDGEFN_API __declspec(dllexport)
#else
#define EDGEFN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum edgefn_status {
    EDGEFN_OK = 0,
    EDGEFN_E_INVALID_ARGUMENT = 1,
    EDGEFN_E_PAYLOAD_TOO_LARGE = 2,
    EDGEFN_E_SHUT_DOWN = 3,
    EDGEFN_E_DUPLICATE_TOPIC = 4,
    EDGEFN_E_UNKNOWN_TOPIC = 5,
    EDGEFN_E_WRONG_CLASS = 6,
    EDGEFN_E_NO_TRIGGER_TOPIC = 7,
    EDGEFN_E_INVALID_MANIFEST = 8,
    EDGEFN_E_UNKNOWN_BUILTIN = 9,
    EDGEFN_E_GUEST_LOAD_FAILURE = 10,
    EDGEFN_E_OUTSIDE_INVOCATION = 11,
    EDGEFN_E_MODEL_NOT_FOUND = 12,
    EDGEFN_E_SHAPE_MISMATCH = 13,
    EDGEFN_E_BACKEND_FAILURE = 14,
    EDGEFN_E_AUTH_FAILED = 15,
    EDGEFN_E_CHECKSUM_MISMATCH = 16,
    EDGEFN_E_VERSION_CONFLICT = 17,
    EDGEFN_E_UNKNOWN_PACKAGE = 18,
    EDGEFN_E_UNKNOWN_VEHICLE = 19,
    EDGEFN_E_STALE_REVISION = 20,
    EDGEFN_E_MALFORMED = 21,
    EDGEFN_E_EMPTY_INPUT = 22,
    EDGEFN_E_IO_FAILURE = 23,
    EDGEFN_E_TIMEOUT = 24,
    EDGEFN_E_ABORTED = 25,
    EDGEFN_E_INTERNAL = 99
} edgefn_status;

EDGEFN_API const char* edgefn_version(void);
/* Kebab-case name such as "auth-failed"; "ok" for EDGEFN_OK. */
EDGEFN_API const char* edgefn_status_name(edgefn_status status);
EDGEFN_API const char* edgefn_last_error(void);
EDGEFN_API void edgefn_string_free(char* s);

/* Cancellation flag shared with long-running calls. */
typedef struct edgefn_cancel edgefn_cancel;
EDGEFN_API edgefn_status edgefn_cancel_create(edgefn_cancel** out);
/* Safe to call from any thread. */
EDGEFN_API void edgefn_cancel_trigger(edgefn_cancel* cancel);
EDGEFN_API int edgefn_cancel_is_set(const edgefn_cancel* cancel);
EDGEFN_API void edgefn_cancel_destroy(edgefn_cancel* cancel);

/* ---- transport --------------------------------------------------------- */

/* Serves an in-process bus on `endpoint` ("unix:<path>" or "tcp:<host>:<port>"). */
typedef struct edgefn_broker edgefn_broker;
EDGEFN_API edgefn_status edgefn_broker_start(const char* endpoint, edgefn_broker** out);
/* Bound endpoint, useful with tcp port 0. Valid until destroy. */
EDGEFN_API const char* edgefn_broker_endpoint(const edgefn_broker* broker);
EDGEFN_API void edgefn_broker_destroy(edgefn_broker* broker);

/* Prints every trigger action seen on the actions topic as a JSON line to
 * `out_path` (stdout when NULL) until cancelled. */
EDGEFN_API edgefn_status edgefn_recorder_run(const char* transport, const char* out_path, edgefn_cancel* cancel);

/* ---- function host ----------------------------------------------------- */

typedef struct edgefn_host edgefn_host;
/* transport: endpoint or "none" for a private in-process bus.
 * orchestrator: host listener endpoint, or "none" to log JSON lines on stdout.
 * affinity: comma-separated core ids, or NULL/"" for no pinning. */
EDGEFN_API edgefn_status edgefn_host_create(const char* manifest_path, const char* transport,
                                            const char* orchestrator, int instrument_rtt, const char* affinity,
                                            edgefn_host** out);
/* Blocks until edgefn_host_stop() or a fatal error. */
EDGEFN_API edgefn_status edgefn_host_run(edgefn_host* host);
EDGEFN_API void edgefn_host_stop(edgefn_host* host);
EDGEFN_API edgefn_status edgefn_host_status(const edgefn_host* host, char** json_out);
EDGEFN_API void edgefn_host_destroy(edgefn_host* host);

/* ---- registry ---------------------------------------------------------- */

typedef struct edgefn_registry edgefn_registry;
EDGEFN_API edgefn_status edgefn_registry_start(const char* data_dir, const char* tokens_file,
                                               const char* vehicles_endpoint, const char* ops_endpoint,
                                               edgefn_registry** out);
EDGEFN_API void edgefn_registry_destroy(edgefn_registry* registry);

/* One operator request. `type` is put_package, set_deployment, query_logs or
 * list; `request_json` carries the payload including "token". A rejected
 * request returns the remote error code with its message. For put_package a
 * "blob_file" key names a local file sent as the base64 "blob". */
EDGEFN_API edgefn_status edgefn_ops_request(const char* ops_endpoint, const char* type, const char* request_json,
                                            char** response_json);

/* ---- orchestrator ------------------------------------------------------ */

typedef struct edgefn_orchestrator edgefn_orchestrator;
/* config_json keys: registry, vehicle_id, token, data_root, transport,
 * serve_transport, host_command (array), instrument_rtt, grace_ms,
 * backoff_time_scale, status_interval_ms. */
EDGEFN_API edgefn_status edgefn_orchestrator_start(const char* config_json, edgefn_orchestrator** out);
/* Blocks until stopped; EDGEFN_E_AUTH_FAILED when the registry refused the token. */
EDGEFN_API edgefn_status edgefn_orchestrator_wait(edgefn_orchestrator* orch);
EDGEFN_API void edgefn_orchestrator_stop(edgefn_orchestrator* orch);
EDGEFN_API edgefn_status edgefn_orchestrator_status(const edgefn_orchestrator* orch, char** json_out);
EDGEFN_API void edgefn_orchestrator_destroy(edgefn_orchestrator* orch);

/* ---- bags -------------------------------------------------------------- */

/* spec_json NULL uses the built-in scenario; seed >= 0 overrides the spec seed. */
EDGEFN_API edgefn_status edgefn_bag_synth(const char* spec_json, int64_t seed, const char* out_path);
EDGEFN_API edgefn_status edgefn_bag_info(const char* path, char** json_out);
EDGEFN_API edgefn_status edgefn_bag_import(const char* index_path, const char* out_path);
/* max_loops 0 with loop set replays until cancelled. */
EDGEFN_API edgefn_status edgefn_bag_replay(const char* path, const char* transport, double speed, int realign,
                                           int loop, uint32_t max_loops, edgefn_cancel* cancel, char** report_json);

/* ---- bench ------------------------------------------------------------- */

/* config_json keys: bag, manifests (array of paths), plan {warmup_s,
 * phase_count, phase_length_s}, speed, implementation, csv, summary, plot.
 * Output files are written when their key is present. */
EDGEFN_API edgefn_status edgefn_bench_run(const char* config_json, edgefn_cancel* cancel, char** result_json);
/* {"rows": [...], "table": "<formatted summary>"} */
EDGEFN_API edgefn_status edgefn_bench_stats(const char* csv_path, char** json_out);
/* Mann-Whitney U on rtt_ms of two CSV files, optionally restricted to one function. */
EDGEFN_API edgefn_status edgefn_bench_compare(const char* csv_a, const char* csv_b, const char* function,
                                              char** json_out);
/* params_json: imu_fft parameters (window, bands, ...), may be NULL. */
EDGEFN_API edgefn_status edgefn_bench_calibrate(const char* bag_path, const char* imu_topic,
                                                const char* params_json, char** json_out);
EDGEFN_API edgefn_status edgefn_plot(const char* csv_path, const char* svg_path);

#ifdef __cplusplus
}
#endif

#endif /* EDGEFN_H */
