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

#include "edgefn/edgefn.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <iostream>
#include <memory>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "edgefn/bag.hpp"
#include "edgefn/bench.hpp"
#include "edgefn/broker.hpp"
#include "edgefn/crypto.hpp"
#include "edgefn/error.hpp"
#include "edgefn/functions.hpp"
#include "edgefn/host.hpp"
#include "edgefn/manifest.hpp"
#include "edgefn/orchestrator.hpp"
#include "edgefn/payloads.hpp"
#include "edgefn/registry.hpp"
#include "edgefn/stats.hpp"

using json = nlohmann::json;
using edgefn::Errc;
using edgefn::Error;

struct edgefn_cancel {
    std::atomic<bool> flag{false};
};

struct edgefn_broker {
    std::shared_ptr<edgefn::LocalTransport> bus;
    std::unique_ptr<edgefn::BrokerServer> server;
    std::string endpoint;
};

struct edgefn_host {
    std::shared_ptr<edgefn::Transport> transport;
    std::unique_ptr<edgefn::Host> host;
};

struct edgefn_registry {
    std::shared_ptr<edgefn::RegistryStore> store;
    std::unique_ptr<edgefn::RegistryServer> server;
};

struct edgefn_orchestrator {
    std::unique_ptr<edgefn::Orchestrator> orch;
};

namespace {

static_assert(static_cast<int>(Errc::invalid_argument) + 1 == EDGEFN_E_INVALID_ARGUMENT);
static_assert(static_cast<int>(Errc::auth_failed) + 1 == EDGEFN_E_AUTH_FAILED);
static_assert(static_cast<int>(Errc::aborted) + 1 == EDGEFN_E_ABORTED);

thread_local std::string t_last_error;

edgefn_status fail(edgefn_status code, const std::string& message) {
    t_last_error = message;
    return code;
}

// Runs `fn` and converts exceptions into status codes.
template <typename Fn>
edgefn_status guarded(Fn&& fn) noexcept {
    t_last_error.clear();
    try {
        fn();
        return EDGEFN_OK;
    } catch (const Error& e) {
        return fail(static_cast<edgefn_status>(static_cast<int>(e.code()) + 1), e.what());
    } catch (const json::exception& e) {
        return fail(EDGEFN_E_MALFORMED, std::string("malformed: ") + e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(EDGEFN_E_IO_FAILURE, std::string("io-failure: ") + e.what());
    } catch (const std::exception& e) {
        return fail(EDGEFN_E_INTERNAL, e.what());
    } catch (...) {
        return fail(EDGEFN_E_INTERNAL, "unknown exception");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw Error(Errc::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const json& j) {
    if (out) *out = dup_string(j.dump());
}

json parse_arg(const char* text, const char* what) {
    require(text, what);
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::malformed, std::string(what) + " is not valid JSON");
    return j;
}

std::shared_ptr<edgefn::Transport> open_transport(const char* endpoint) {
    if (!endpoint || !*endpoint || std::string_view(endpoint) == "none")
        return std::make_shared<edgefn::LocalTransport>();
    return std::make_shared<edgefn::SocketTransport>(edgefn::Endpoint::parse(endpoint));
}

const std::atomic<bool>* flag_of(edgefn_cancel* c) { return c ? &c->flag : nullptr; }

json summary_json(const edgefn::bench::SummaryRow& r) {
    return {{"function", r.function},
            {"implementation", r.implementation},
            {"phase", r.phase},
            {"n", r.stats.n},
            {"min_ms", r.stats.min},
            {"max_ms", r.stats.max},
            {"mean_ms", r.stats.mean},
            {"mad_ms", r.stats.mad},
            {"p95_ms", r.stats.p95}};
}

json summary_rows_json(const std::vector<edgefn::bench::SummaryRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) out.push_back(summary_json(r));
    return out;
}

edgefn::Params params_from_json(const json& j) {
    edgefn::Params p;
    for (const auto& [k, v] : j.items()) p[k] = v.is_string() ? v.get<std::string>() : v.dump();
    return p;
}

} // namespace

extern "C" {

const char* edgefn_version(void) { return "0.1.0"; }

const char* edgefn_status_name(edgefn_status status) {
    if (status == EDGEFN_OK) return "ok";
    if (status == EDGEFN_E_INTERNAL) return "internal";
    const int idx = static_cast<int>(status) - 1;
    if (idx < 0 || idx > static_cast<int>(Errc::aborted)) return "unknown";
    return edgefn::errc_name(static_cast<Errc>(idx)).data();
}

const char* edgefn_last_error(void) { return t_last_error.c_str(); }

void edgefn_string_free(char* s) { std::free(s); }

edgefn_status edgefn_cancel_create(edgefn_cancel** out) {
    return guarded([&] {
        require(out, "out");
        *out = new edgefn_cancel();
    });
}

void edgefn_cancel_trigger(edgefn_cancel* cancel) {
    if (cancel) cancel->flag.store(true);
}

int edgefn_cancel_is_set(const edgefn_cancel* cancel) { return cancel && cancel->flag.load() ? 1 : 0; }

void edgefn_cancel_destroy(edgefn_cancel* cancel) { delete cancel; }

// --- transport ------------------------------------------------------------------

edgefn_status edgefn_broker_start(const char* endpoint, edgefn_broker** out) {
    return guarded([&] {
        require(endpoint, "endpoint");
        require(out, "out");
        auto b = std::make_unique<edgefn_broker>();
        b->bus = std::make_shared<edgefn::LocalTransport>();
        b->server = std::make_unique<edgefn::BrokerServer>(b->bus, edgefn::Endpoint::parse(endpoint));
        b->endpoint = b->server->endpoint().str();
        *out = b.release();
    });
}

const char* edgefn_broker_endpoint(const edgefn_broker* broker) { return broker ? broker->endpoint.c_str() : ""; }

void edgefn_broker_destroy(edgefn_broker* broker) {
    if (!broker) return;
    broker->server->stop();
    broker->bus->shutdown();
    delete broker;
}

edgefn_status edgefn_recorder_run(const char* transport, const char* out_path, edgefn_cancel* cancel) {
    return guarded([&] {
        auto t = open_transport(transport);
        std::ofstream file;
        if (out_path) {
            file.open(out_path, std::ios::app);
            if (!file) throw Error(Errc::io_failure, std::string("cannot open ") + out_path);
        }
        std::ostream& out = out_path ? static_cast<std::ostream&>(file) : std::cout;
        auto sub = t->subscribe(edgefn::kActionsTopic, edgefn::QosProfile::keep_last(1024));
        while (!edgefn_cancel_is_set(cancel)) {
            auto env = sub.pop(std::chrono::milliseconds(100));
            if (!env) continue;
            json line = {{"seq", env->seq}, {"source_ts", env->source_ts}};
            try {
                line["action"] = edgefn::to_json(edgefn::trigger_action_from_json(edgefn::parse_json_bytes(env->bytes())));
            } catch (const std::exception& e) {
                line["error"] = e.what();
            }
            out << line.dump() << '\n' << std::flush;
        }
        t->shutdown();
    });
}

// --- host -------------------------------------------------------------------------

edgefn_status edgefn_host_create(const char* manifest_path, const char* transport, const char* orchestrator,
                                 int instrument_rtt, const char* affinity, edgefn_host** out) {
    return guarded([&] {
        require(manifest_path, "manifest_path");
        require(out, "out");
        const auto manifest = edgefn::load_manifest(manifest_path);
        edgefn::HostOptions opts;
        opts.instrument_rtt = instrument_rtt != 0;
        if (affinity && *affinity) {
            std::string list(affinity);
            for (std::size_t pos = 0; pos <= list.size();) {
                const auto comma = std::min(list.find(',', pos), list.size());
                try {
                    opts.affinity.push_back(std::stoi(list.substr(pos, comma - pos)));
                } catch (const std::exception&) {
                    throw Error(Errc::invalid_argument, "bad affinity list '" + list + "'");
                }
                pos = comma + 1;
            }
        }
        if (orchestrator && *orchestrator && std::string_view(orchestrator) != "none")
            opts.sink = std::make_shared<edgefn::ChannelSink>(edgefn::Endpoint::parse(orchestrator), manifest.name);
        else
            opts.sink = std::make_shared<edgefn::StdoutSink>();
        auto h = std::make_unique<edgefn_host>();
        h->transport = open_transport(transport);
        h->host = edgefn::Host::load(manifest, h->transport, opts);
        *out = h.release();
    });
}

edgefn_status edgefn_host_run(edgefn_host* host) {
    return guarded([&] {
        require(host, "host");
        host->host->run();
    });
}

void edgefn_host_stop(edgefn_host* host) {
    if (host) host->host->stop();
}

edgefn_status edgefn_host_status(const edgefn_host* host, char** json_out) {
    return guarded([&] {
        require(host, "host");
        emit(json_out, host->host->status().to_json());
    });
}

void edgefn_host_destroy(edgefn_host* host) {
    if (!host) return;
    host->host.reset();
    host->transport->shutdown();
    delete host;
}

// --- registry ---------------------------------------------------------------------

edgefn_status edgefn_registry_start(const char* data_dir, const char* tokens_file, const char* vehicles_endpoint,
                                    const char* ops_endpoint, edgefn_registry** out) {
    return guarded([&] {
        require(data_dir, "data_dir");
        require(tokens_file, "tokens_file");
        require(vehicles_endpoint, "vehicles_endpoint");
        require(ops_endpoint, "ops_endpoint");
        require(out, "out");
        auto r = std::make_unique<edgefn_registry>();
        r->store = std::make_shared<edgefn::RegistryStore>(data_dir, edgefn::Tokens::load(tokens_file));
        r->server = std::make_unique<edgefn::RegistryServer>(r->store, edgefn::Endpoint::parse(vehicles_endpoint),
                                                             edgefn::Endpoint::parse(ops_endpoint));
        *out = r.release();
    });
}

void edgefn_registry_destroy(edgefn_registry* registry) {
    if (!registry) return;
    registry->server->stop();
    delete registry;
}

edgefn_status edgefn_ops_request(const char* ops_endpoint, const char* type, const char* request_json,
                                 char** response_json) {
    return guarded([&] {
        require(ops_endpoint, "ops_endpoint");
        require(type, "type");
        const auto kind = edgefn::control_type_from_name(type);
        using edgefn::ControlType;
        if (kind != ControlType::put_package && kind != ControlType::set_deployment &&
            kind != ControlType::query_logs && kind != ControlType::list)
            throw Error(Errc::invalid_argument, std::string("not an operator request: ") + type);
        json request = parse_arg(request_json, "request_json");
        if (kind == ControlType::put_package && request.contains("blob_file")) {
            const auto path = request["blob_file"].get<std::string>();
            std::ifstream in(path, std::ios::binary);
            if (!in) throw Error(Errc::io_failure, "cannot read " + path);
            const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            request.erase("blob_file");
            request["blob"] = edgefn::base64_encode(
                edgefn::ByteView(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
        }
        emit(response_json, edgefn::ops_call(edgefn::Endpoint::parse(ops_endpoint), kind, request));
    });
}

// --- orchestrator -----------------------------------------------------------------

edgefn_status edgefn_orchestrator_start(const char* config_json, edgefn_orchestrator** out) {
    return guarded([&] {
        require(out, "out");
        const json c = parse_arg(config_json, "config_json");
        static const std::set<std::string> known = {"registry",       "vehicle_id",         "token",
                                                    "data_root",      "transport",          "serve_transport",
                                                    "host_command",   "instrument_rtt",     "grace_ms",
                                                    "backoff_time_scale", "status_interval_ms"};
        for (const auto& [k, _] : c.items())
            if (!known.count(k)) throw Error(Errc::invalid_argument, "unknown orchestrator option '" + k + "'");
        edgefn::OrchestratorOptions o;
        if (c.contains("registry") && !c["registry"].is_null())
            o.registry = edgefn::Endpoint::parse(c["registry"].get<std::string>());
        o.vehicle_id = c.at("vehicle_id").get<std::string>();
        o.token = c.value("token", std::string());
        o.data_root = c.at("data_root").get<std::string>();
        o.transport = c.value("transport", std::string("none"));
        if (c.contains("serve_transport") && !c["serve_transport"].is_null())
            o.serve_transport = edgefn::Endpoint::parse(c["serve_transport"].get<std::string>());
        o.host_command = c.at("host_command").get<std::vector<std::string>>();
        o.instrument_rtt = c.value("instrument_rtt", false);
        o.grace = edgefn::Millis(c.value("grace_ms", 5000));
        o.backoff.time_scale = c.value("backoff_time_scale", 1.0);
        o.status_interval = edgefn::Millis(c.value("status_interval_ms", 1000));
        auto h = std::make_unique<edgefn_orchestrator>();
        h->orch = std::make_unique<edgefn::Orchestrator>(std::move(o));
        h->orch->start();
        *out = h.release();
    });
}

edgefn_status edgefn_orchestrator_wait(edgefn_orchestrator* orch) {
    return guarded([&] {
        require(orch, "orch");
        if (orch->orch->wait() == edgefn::kExitAuth)
            throw Error(Errc::auth_failed, "registry rejected the vehicle token");
    });
}

void edgefn_orchestrator_stop(edgefn_orchestrator* orch) {
    if (orch) orch->orch->stop();
}

edgefn_status edgefn_orchestrator_status(const edgefn_orchestrator* orch, char** json_out) {
    return guarded([&] {
        require(orch, "orch");
        emit(json_out, orch->orch->status_json());
    });
}

void edgefn_orchestrator_destroy(edgefn_orchestrator* orch) {
    if (!orch) return;
    orch->orch->stop();
    delete orch;
}

// --- bags -------------------------------------------------------------------------

edgefn_status edgefn_bag_synth(const char* spec_json, int64_t seed, const char* out_path) {
    return guarded([&] {
        require(out_path, "out_path");
        auto spec = spec_json ? edgefn::bench::synth_spec_from_json(parse_arg(spec_json, "spec_json"))
                              : edgefn::bench::default_synth_spec();
        if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
        edgefn::write_bag(out_path, edgefn::bench::synth_bag(spec));
    });
}

edgefn_status edgefn_bag_info(const char* path, char** json_out) {
    return guarded([&] {
        require(path, "path");
        const auto bag = edgefn::read_bag(path);
        json topics = json::array();
        for (std::uint32_t i = 0; i < bag.topics.size(); ++i) {
            const auto& t = bag.topics[i];
            topics.push_back({{"name", t.name},
                              {"content_type", edgefn::content_type_name(t.content_type)},
                              {"metadata", t.metadata},
                              {"records", bag.count(i)}});
        }
        json info = {{"version", edgefn::kBagVersion}, {"records", bag.records.size()}, {"topics", topics}};
        if (!bag.records.empty()) {
            info["first_timestamp_ns"] = bag.records.front().timestamp_ns;
            info["last_timestamp_ns"] = bag.records.back().timestamp_ns;
            info["duration_s"] =
                static_cast<double>(bag.records.back().timestamp_ns - bag.records.front().timestamp_ns) / 1e9;
        }
        emit(json_out, info);
    });
}

edgefn_status edgefn_bag_import(const char* index_path, const char* out_path) {
    return guarded([&] {
        require(index_path, "index_path");
        require(out_path, "out_path");
        edgefn::write_bag(out_path, edgefn::import_jsonl(index_path));
    });
}

edgefn_status edgefn_bag_replay(const char* path, const char* transport, double speed, int realign, int loop,
                                uint32_t max_loops, edgefn_cancel* cancel, char** report_json) {
    return guarded([&] {
        require(path, "path");
        if (!(speed > 0)) throw Error(Errc::invalid_argument, "speed must be positive");
        const auto bag = edgefn::read_bag(path);
        auto t = open_transport(transport);
        edgefn::bench::ReplayOptions opts{speed, realign != 0, loop != 0, max_loops};
        const auto report = edgefn::bench::replay(bag, *t, opts, flag_of(cancel));
        t->shutdown();
        emit(report_json, {{"records_sent", report.records_sent},
                           {"duration_s", static_cast<double>(report.duration) / 1e9},
                           {"passes", report.passes}});
    });
}

// --- bench ------------------------------------------------------------------------

edgefn_status edgefn_bench_run(const char* config_json, edgefn_cancel* cancel, char** result_json) {
    return guarded([&] {
        const json c = parse_arg(config_json, "config_json");
        namespace bench = edgefn::bench;
        bench::BenchRunConfig cfg;
        for (const auto& p : c.at("manifests")) cfg.manifests.push_back(edgefn::load_manifest(p.get<std::string>()));
        if (c.contains("plan")) {
            const auto& p = c["plan"];
            cfg.plan.warmup_s = p.value("warmup_s", cfg.plan.warmup_s);
            cfg.plan.phase_count = p.value("phase_count", cfg.plan.phase_count);
            cfg.plan.phase_length_s = p.value("phase_length_s", cfg.plan.phase_length_s);
        }
        cfg.replay.speed = c.value("speed", 1.0);
        cfg.implementation = c.value("implementation", cfg.implementation);
        const auto bag = edgefn::read_bag(c.at("bag").get<std::string>());
        const auto res = bench::run_bench(bag, cfg, flag_of(cancel));
        if (res.rows.empty()) throw Error(Errc::empty_input, "no RTT records were collected");

        const auto summary = bench::summarize(res.rows);
        const std::string table = bench::format_summary(summary);
        if (c.contains("csv")) bench::write_csv(c["csv"].get<std::string>(), res.rows);
        if (c.contains("summary")) {
            std::ofstream f(c["summary"].get<std::string>());
            f << table;
            if (!f) throw Error(Errc::io_failure, "cannot write summary");
        }
        if (c.contains("plot")) bench::write_box_plot(c["plot"].get<std::string>(), res.rows);
        json hosts = json::array();
        for (const auto& h : res.hosts) hosts.push_back(h.to_json());
        emit(result_json, {{"rows", res.rows.size()},
                           {"discarded_warmup", res.measurement.discarded_warmup},
                           {"records_replayed", res.replay.records_sent},
                           {"summary", summary_rows_json(summary)},
                           {"table", table},
                           {"hosts", hosts}});
    });
}

edgefn_status edgefn_bench_stats(const char* csv_path, char** json_out) {
    return guarded([&] {
        require(csv_path, "csv_path");
        const auto rows = edgefn::bench::read_csv(csv_path);
        if (rows.empty()) throw Error(Errc::empty_input, std::string(csv_path) + " has no data rows");
        const auto summary = edgefn::bench::summarize(rows);
        emit(json_out, {{"rows", summary_rows_json(summary)}, {"table", edgefn::bench::format_summary(summary)}});
    });
}

edgefn_status edgefn_bench_compare(const char* csv_a, const char* csv_b, const char* function, char** json_out) {
    return guarded([&] {
        require(csv_a, "csv_a");
        require(csv_b, "csv_b");
        auto pick = [&](const char* path) {
            std::vector<double> v;
            for (const auto& r : edgefn::bench::read_csv(path))
                if (!function || !*function || r.function == function) v.push_back(r.rtt_ms);
            if (v.empty()) throw Error(Errc::empty_input, std::string(path) + " has no matching rows");
            return v;
        };
        const auto a = pick(csv_a), b = pick(csv_b);
        const auto r = edgefn::mwu(a, b);
        const auto sa = edgefn::stats(a), sb = edgefn::stats(b);
        emit(json_out, {{"u", r.u},
                        {"p_two_sided", r.p_two_sided},
                        {"method", edgefn::mwu_method_name(r.method)},
                        {"n_a", a.size()},
                        {"n_b", b.size()},
                        {"mean_a_ms", sa.mean},
                        {"mean_b_ms", sb.mean},
                        {"median_a_ms", edgefn::median(a)},
                        {"median_b_ms", edgefn::median(b)}});
    });
}

edgefn_status edgefn_bench_calibrate(const char* bag_path, const char* imu_topic, const char* params_json,
                                     char** json_out) {
    return guarded([&] {
        require(bag_path, "bag_path");
        const auto bag = edgefn::read_bag(bag_path);
        const edgefn::Params params = params_json ? params_from_json(parse_arg(params_json, "params_json"))
                                                  : edgefn::Params{};
        const auto cfg = edgefn::functions::RoughnessConfig::from_params(params);
        const auto cal =
            edgefn::bench::calibrate(bag, imu_topic && *imu_topic ? imu_topic : "/sensors/imu", cfg);
        emit(json_out, {{"start_threshold", cal.start_threshold},
                        {"stop_threshold", cal.stop_threshold},
                        {"low_score", cal.low_score},
                        {"high_score", cal.high_score},
                        {"windows", cal.windows}});
    });
}

edgefn_status edgefn_plot(const char* csv_path, const char* svg_path) {
    return guarded([&] {
        require(csv_path, "csv_path");
        require(svg_path, "svg_path");
        const auto rows = edgefn::bench::read_csv(csv_path);
        if (rows.empty()) throw Error(Errc::empty_input, std::string(csv_path) + " has no data rows");
        edgefn::bench::write_box_plot(svg_path, rows);
    });
}

} // extern "C"
