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

// edgefn: single entry point for the registry, orchestrator, function host,
// operator client, bag tools and benchmark harness. Everything goes through
// the C API in edgefn.h.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <condition_variable>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edgefn/edgefn.h"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAuth = 3;

// --- diagnostics ----------------------------------------------------------------

enum class Level { debug, info, warn, error };
Level g_level = Level::info;

void log(Level level, const std::string& message) {
    static const char* const names[] = {"debug", "info", "warn", "error"};
    if (level < g_level) return;
    std::cerr << "edgefn [" << names[static_cast<int>(level)] << "] " << message << '\n';
}

// Thrown by subcommands; main turns it into an exit code.
struct Failure {
    int exit_code;
    std::string message;
};

void check(edgefn_status st) {
    if (st == EDGEFN_OK) return;
    std::string msg = edgefn_last_error();
    if (msg.empty()) msg = edgefn_status_name(st);
    throw Failure{st == EDGEFN_E_AUTH_FAILED ? kExitAuth : kExitRuntime, msg};
}

// Takes ownership of a string returned by the library.
json take_json(char* raw) {
    if (!raw) return json();
    json j = json::parse(raw);
    edgefn_string_free(raw);
    return j;
}

// --- signals --------------------------------------------------------------------

// SIGINT and SIGTERM are blocked in every thread and consumed by one sigwait
// thread. The first delivery runs the registered stop action; a second one
// exits immediately.
class SignalWatcher {
public:
    static SignalWatcher& instance() {
        static SignalWatcher w;
        return w;
    }

    void install() {
        sigset_t set;
        sigemptyset(&set);
        sigaddset(&set, SIGINT);
        sigaddset(&set, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set, nullptr);
        std::signal(SIGPIPE, SIG_IGN);
        std::thread([set] {
            int sig = 0;
            bool seen = false;
            while (sigwait(&set, &sig) == 0) {
                if (seen) _exit(128 + sig);
                seen = true;
                instance().fire();
            }
        }).detach();
    }

    void on_stop(std::function<void()> action) {
        std::lock_guard lk(mu_);
        action_ = std::move(action);
        if (fired_ && action_) action_();
    }

    void wait() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return fired_; });
    }

private:
    void fire() {
        std::lock_guard lk(mu_);
        fired_ = true;
        if (action_) action_();
        cv_.notify_all();
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::function<void()> action_;
    bool fired_ = false;
};

struct Cancel {
    edgefn_cancel* handle = nullptr;
    Cancel() {
        check(edgefn_cancel_create(&handle));
        SignalWatcher::instance().on_stop([h = handle] { edgefn_cancel_trigger(h); });
    }
    ~Cancel() {
        SignalWatcher::instance().on_stop({});
        edgefn_cancel_destroy(handle);
    }
};

// --- JSON config ----------------------------------------------------------------

// Reads --config files. Nested objects address subcommands, so
// {"orchestrator": {"run": {"vehicle-id": "v1"}}} sets `orchestrator run
// --vehicle-id`. Underscores in keys are accepted for dashes.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        return dump(app, default_also).dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            input >> j;
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config", "top level must be an object");
        std::vector<CLI::ConfigItem> items;
        collect(j, {}, items);
        return items;
    }

private:
    static std::string normalize(std::string key) {
        for (auto& c : key)
            if (c == '_') c = '-';
        return key;
    }

    static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

    static void collect(const json& obj, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto next = parents;
                next.push_back(key);
                collect(value, next, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = normalize(key);
            if (value.is_array()) {
                for (const auto& e : value) item.inputs.push_back(scalar(e));
            } else if (!value.is_null()) {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
    }

    static json dump(const CLI::App* app, bool default_also) {
        json out = json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
            const auto& name = opt->get_lnames().front();
            if (name == "help" || name == "help-all" || name == "config") continue;
            auto results = opt->results();
            if (results.empty() && default_also && !opt->get_default_str().empty())
                results.push_back(opt->get_default_str());
            if (results.empty()) continue;
            if (results.size() == 1 && opt->get_expected_max() <= 1) out[name] = results.front();
            else out[name] = results;
        }
        for (const CLI::App* sub : app->get_subcommands({})) {
            auto child = dump(sub, default_also);
            if (!child.empty()) out[sub->get_name()] = std::move(child);
        }
        return out;
    }
};

// --- globals --------------------------------------------------------------------

struct Globals {
    std::string transport = "none";
    std::string log_level = "info";
    std::int64_t seed = -1;
};

std::string self_exe() {
    std::error_code ec;
    auto p = fs::read_symlink("/proc/self/exe", ec);
    return ec ? std::string("edgefn") : p.string();
}

// --- subcommands ----------------------------------------------------------------

void add_registry(CLI::App& app) {
    auto* group = app.add_subcommand("registry", "Central package and deployment registry");
    group->require_subcommand(1);
    auto* serve = group->add_subcommand("serve", "Serve the vehicle and operator endpoints until interrupted");
    struct Opts {
        std::string vehicles = "tcp:0.0.0.0:7400";
        std::string ops = "tcp:127.0.0.1:7401";
        std::string data_dir = "registry-data";
        std::string tokens_file;
    };
    auto o = std::make_shared<Opts>();
    serve->add_option("--listen-vehicles", o->vehicles, "Endpoint for orchestrator connections")
        ->capture_default_str();
    serve->add_option("--listen-ops", o->ops, "Endpoint for operator requests")->capture_default_str();
    serve->add_option("--data-dir", o->data_dir, "Directory for packages, deployments and logs")
        ->capture_default_str();
    serve->add_option("--tokens-file", o->tokens_file, "JSON file with SHA-256 digests of user and vehicle tokens")
        ->required();
    serve->callback([o] {
        edgefn_registry* reg = nullptr;
        check(edgefn_registry_start(o->data_dir.c_str(), o->tokens_file.c_str(), o->vehicles.c_str(),
                                    o->ops.c_str(), &reg));
        log(Level::info, "registry serving vehicles on " + o->vehicles + ", operators on " + o->ops);
        SignalWatcher::instance().wait();
        edgefn_registry_destroy(reg);
        log(Level::info, "registry stopped");
    });
}

void add_orchestrator(CLI::App& app, const Globals& g) {
    auto* group = app.add_subcommand("orchestrator", "Edge-side agent that runs deployed functions");
    group->require_subcommand(1);
    auto* run = group->add_subcommand("run", "Connect to the registry and supervise function hosts");
    struct Opts {
        std::string registry;
        std::string vehicle_id;
        std::string token;
        std::string data_root = "edgefn-data";
        std::string serve_transport;
        std::vector<std::string> host_command;
        bool instrument_rtt = false;
        int grace_ms = 5000;
        int status_interval_ms = 1000;
        double backoff_time_scale = 1.0;
    };
    auto o = std::make_shared<Opts>();
    run->add_option("--registry", o->registry, "Registry vehicle endpoint; omit to run from the cached state only");
    run->add_option("--vehicle-id", o->vehicle_id, "Identity presented to the registry")->required();
    run->add_option("--token", o->token, "Vehicle token");
    run->add_option("--data-root", o->data_root, "Staging area, host manifests and cached desired state")
        ->capture_default_str();
    run->add_option("--serve-transport", o->serve_transport,
                    "Run an embedded broker on this endpoint and point hosts at it");
    run->add_option("--host-command", o->host_command,
                    "Host executable and leading arguments (default: this binary with 'host run')");
    run->add_option("--instrument-rtt", o->instrument_rtt, "Publish RTT records from every host (true|false)")
        ->capture_default_str();
    run->add_option("--grace-ms", o->grace_ms, "Time between SIGTERM and SIGKILL when stopping a host")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--status-interval-ms", o->status_interval_ms, "Period of status reports to the registry")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--backoff-time-scale", o->backoff_time_scale, "Multiplier on restart backoff durations")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->callback([o, &g] {
        json cfg = {{"vehicle_id", o->vehicle_id},
                    {"token", o->token},
                    {"data_root", o->data_root},
                    {"transport", g.transport},
                    {"host_command", o->host_command.empty()
                                         ? std::vector<std::string>{self_exe(), "host", "run"}
                                         : o->host_command},
                    {"instrument_rtt", o->instrument_rtt},
                    {"grace_ms", o->grace_ms},
                    {"status_interval_ms", o->status_interval_ms},
                    {"backoff_time_scale", o->backoff_time_scale}};
        if (!o->registry.empty()) cfg["registry"] = o->registry;
        if (!o->serve_transport.empty()) cfg["serve_transport"] = o->serve_transport;
        edgefn_orchestrator* orch = nullptr;
        check(edgefn_orchestrator_start(cfg.dump().c_str(), &orch));
        SignalWatcher::instance().on_stop([orch] { edgefn_orchestrator_stop(orch); });
        log(Level::info, "orchestrator running as " + o->vehicle_id);
        const auto st = edgefn_orchestrator_wait(orch);
        const std::string err = edgefn_last_error();
        SignalWatcher::instance().on_stop({});
        edgefn_orchestrator_destroy(orch);
        if (st != EDGEFN_OK)
            throw Failure{st == EDGEFN_E_AUTH_FAILED ? kExitAuth : kExitRuntime, err};
    });
}

void add_host(CLI::App& app, const Globals& g) {
    auto* group = app.add_subcommand("host", "Function host process");
    group->require_subcommand(1);
    auto* run = group->add_subcommand("run", "Run one function until interrupted");
    struct Opts {
        std::string manifest;
        std::string orchestrator_channel = "none";
        bool instrument_rtt = false;
        std::string affinity;
    };
    auto o = std::make_shared<Opts>();
    run->add_option("--manifest", o->manifest, "Function manifest JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--orchestrator-channel", o->orchestrator_channel,
                    "Orchestrator host endpoint, or 'none' to print logs on stdout")
        ->capture_default_str();
    run->add_option("--instrument-rtt", o->instrument_rtt, "Publish one RTT record per invocation (true|false)")
        ->capture_default_str();
    run->add_option("--affinity", o->affinity, "Comma-separated CPU cores for the execution thread");
    run->callback([o, &g] {
        edgefn_host* host = nullptr;
        check(edgefn_host_create(o->manifest.c_str(), g.transport.c_str(), o->orchestrator_channel.c_str(),
                                 o->instrument_rtt ? 1 : 0, o->affinity.c_str(), &host));
        SignalWatcher::instance().on_stop([host] { edgefn_host_stop(host); });
        const auto st = edgefn_host_run(host);
        const std::string err = edgefn_last_error();
        SignalWatcher::instance().on_stop({});
        edgefn_host_destroy(host);
        if (st != EDGEFN_OK) throw Failure{kExitRuntime, err};
    });
}

void add_deploy(CLI::App& app) {
    auto* group = app.add_subcommand("deploy", "Operator client for the registry");
    group->require_subcommand(1);
    auto ops = std::make_shared<std::string>("tcp:127.0.0.1:7401");
    auto token = std::make_shared<std::string>();
    auto common = [&](CLI::App* sub) {
        sub->add_option("--ops", *ops, "Registry operator endpoint")->capture_default_str();
        sub->add_option("--token", *token, "Operator token")->required();
    };
    auto request = [ops, token](const char* type, json payload) {
        payload["token"] = *token;
        char* raw = nullptr;
        check(edgefn_ops_request(ops->c_str(), type, payload.dump().c_str(), &raw));
        return take_json(raw);
    };

    auto* put = group->add_subcommand("put", "Upload a package version");
    common(put);
    struct PutOpts {
        std::string manifest, version, name, kind = "native", blob;
    };
    auto p = std::make_shared<PutOpts>();
    put->add_option("--manifest", p->manifest, "Manifest template JSON file")->required()->check(CLI::ExistingFile);
    put->add_option("--version", p->version, "Package version")->required();
    put->add_option("--name", p->name, "Package name (default: the manifest name)");
    put->add_option("--kind", p->kind, "native or guest")->capture_default_str()->check(
        CLI::IsMember({"native", "guest"}));
    put->add_option("--blob", p->blob, "Guest archive file")->check(CLI::ExistingFile);
    put->callback([p, request] {
        std::ifstream in(p->manifest);
        json manifest = json::parse(in, nullptr, false);
        if (manifest.is_discarded()) throw Failure{kExitRuntime, p->manifest + " is not valid JSON"};
        json req = {{"name", p->name.empty() ? manifest.value("name", std::string()) : p->name},
                    {"version", p->version},
                    {"kind", p->kind},
                    {"manifest", manifest}};
        if (!p->blob.empty()) req["blob_file"] = fs::absolute(p->blob).string();
        std::cout << request("put_package", req).dump(2) << '\n';
    });

    auto* set = group->add_subcommand("set", "Set the functions deployed to a vehicle");
    common(set);
    struct SetOpts {
        std::string vehicle, file;
        std::vector<std::string> functions, params, autostart;
    };
    auto s = std::make_shared<SetOpts>();
    set->add_option("--vehicle", s->vehicle, "Target vehicle id")->required();
    set->add_option("--function", s->functions, "Function to deploy as NAME@VERSION (repeatable)");
    set->add_option("--param", s->params, "Parameter override as NAME.KEY=VALUE (repeatable)");
    set->add_option("--autostart", s->autostart, "Function NAME to start from cache when offline (repeatable)");
    set->add_option("--file", s->file, "JSON file with a \"functions\" array, used instead of --function")
        ->check(CLI::ExistingFile);
    set->callback([s, request] {
        json functions = json::array();
        if (!s->file.empty()) {
            std::ifstream in(s->file);
            json doc = json::parse(in, nullptr, false);
            if (doc.is_discarded() || !doc.contains("functions"))
                throw Failure{kExitRuntime, s->file + " needs a \"functions\" array"};
            functions = doc["functions"];
        }
        for (const auto& f : s->functions) {
            const auto at = f.find('@');
            if (at == std::string::npos || at == 0 || at + 1 == f.size())
                throw Failure{kExitUsage, "--function expects NAME@VERSION, got '" + f + "'"};
            functions.push_back({{"name", f.substr(0, at)}, {"version", f.substr(at + 1)}});
        }
        auto find = [&](const std::string& name) -> json& {
            for (auto& f : functions)
                if (f.value("name", std::string()) == name) return f;
            throw Failure{kExitUsage, "no deployed function named '" + name + "'"};
        };
        for (const auto& kv : s->params) {
            const auto dot = kv.find('.'), eq = kv.find('=');
            if (dot == std::string::npos || eq == std::string::npos || eq < dot)
                throw Failure{kExitUsage, "--param expects NAME.KEY=VALUE, got '" + kv + "'"};
            find(kv.substr(0, dot))["params"][kv.substr(dot + 1, eq - dot - 1)] = kv.substr(eq + 1);
        }
        for (const auto& name : s->autostart) find(name)["autostart"] = true;
        std::cout << request("set_deployment", {{"vehicle", s->vehicle}, {"functions", functions}}).dump(2) << '\n';
    });

    auto* list = group->add_subcommand("list", "List packages and vehicles");
    common(list);
    list->callback([request] { std::cout << request("list", json::object()).dump(2) << '\n'; });

    auto* logs = group->add_subcommand("logs", "Query logs relayed from a vehicle");
    common(logs);
    struct LogOpts {
        std::string vehicle, function, level;
        std::int64_t from = -1, to = -1;
    };
    auto l = std::make_shared<LogOpts>();
    logs->add_option("--vehicle", l->vehicle, "Vehicle id")->required();
    logs->add_option("--function", l->function, "Only this function");
    logs->add_option("--level", l->level, "Only this level")->check(CLI::IsMember({"debug", "info", "warn", "error"}));
    logs->add_option("--from-ns", l->from, "Earliest record timestamp, inclusive");
    logs->add_option("--to-ns", l->to, "Latest record timestamp, inclusive");
    logs->callback([l, request] {
        json q = {{"vehicle", l->vehicle}};
        if (!l->function.empty()) q["function"] = l->function;
        if (!l->level.empty()) q["level"] = l->level;
        if (l->from >= 0) q["from"] = l->from;
        if (l->to >= 0) q["to"] = l->to;
        const json res = request("query_logs", q);
        for (const auto& r : res.value("records", json::array())) std::cout << r.dump() << '\n';
    });
}

void add_bag(CLI::App& app, const Globals& g) {
    auto* group = app.add_subcommand("bag", "Create, inspect and replay bag files");
    group->require_subcommand(1);

    auto* synth = group->add_subcommand("synth", "Write a synthetic IMU and camera bag");
    auto so = std::make_shared<std::pair<std::string, std::string>>();
    synth->add_option("--spec", so->first, "Scenario JSON file (default: built-in scenario)")
        ->check(CLI::ExistingFile);
    synth->add_option("--out", so->second, "Output bag path")->required();
    synth->callback([so, &g] {
        std::string spec;
        if (!so->first.empty()) {
            std::ifstream in(so->first);
            spec.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        }
        check(edgefn_bag_synth(spec.empty() ? nullptr : spec.c_str(), g.seed, so->second.c_str()));
        log(Level::info, "wrote " + so->second);
    });

    auto* info = group->add_subcommand("info", "Print the topic table of a bag");
    auto path = std::make_shared<std::string>();
    auto as_json = std::make_shared<bool>(false);
    info->add_option("bag,--bag", *path, "Bag file")->required()->check(CLI::ExistingFile);
    info->add_flag("--json", *as_json, "Print the raw JSON description");
    info->callback([path, as_json] {
        char* raw = nullptr;
        check(edgefn_bag_info(path->c_str(), &raw));
        const json j = take_json(raw);
        if (*as_json) {
            std::cout << j.dump(2) << '\n';
            return;
        }
        std::printf("bag %s: format v%d, %zu records, %.3f s\n", path->c_str(), j["version"].get<int>(),
                    j["records"].get<std::size_t>(), j.value("duration_s", 0.0));
        std::printf("%-28s %-18s %10s\n", "topic", "content_type", "records");
        for (const auto& t : j["topics"])
            std::printf("%-28s %-18s %10zu\n", t["name"].get<std::string>().c_str(),
                        t["content_type"].get<std::string>().c_str(), t["records"].get<std::size_t>());
    });

    auto* replay = group->add_subcommand("replay", "Publish a bag onto a transport");
    struct ReplayOpts {
        std::string bag;
        double speed = 1.0;
        bool no_realign = false, loop = false;
        unsigned max_loops = 0;
    };
    auto r = std::make_shared<ReplayOpts>();
    replay->add_option("bag,--bag", r->bag, "Bag file")->required()->check(CLI::ExistingFile);
    replay->add_option("--speed", r->speed, "Playback rate multiplier")->capture_default_str()->check(
        CLI::PositiveNumber);
    replay->add_flag("--no-realign", r->no_realign, "Keep recorded timestamps instead of shifting them to now");
    replay->add_flag("--loop", r->loop, "Start over at the end of the bag");
    replay->add_option("--max-loops", r->max_loops, "Stop after this many passes when looping (0: until interrupted)")
        ->capture_default_str();
    replay->callback([r, &g] {
        Cancel cancel;
        char* raw = nullptr;
        check(edgefn_bag_replay(r->bag.c_str(), g.transport.c_str(), r->speed, r->no_realign ? 0 : 1,
                                r->loop ? 1 : 0, r->max_loops, cancel.handle, &raw));
        std::cout << take_json(raw).dump() << '\n';
    });

    auto* import = group->add_subcommand("import", "Convert a JSON-lines index with payload files into a bag");
    auto io = std::make_shared<std::pair<std::string, std::string>>();
    import->add_option("--index", io->first, "JSON-lines index file")->required()->check(CLI::ExistingFile);
    import->add_option("--out", io->second, "Output bag path")->required();
    import->callback([io] {
        check(edgefn_bag_import(io->first.c_str(), io->second.c_str()));
        log(Level::info, "wrote " + io->second);
    });
}

void add_bench(CLI::App& app) {
    auto* group = app.add_subcommand("bench", "Round-trip latency benchmark");
    group->require_subcommand(1);

    auto* run = group->add_subcommand("run", "Replay a bag through functions and measure RTT");
    struct RunOpts {
        std::string bag, plan = "20,3,20", implementation = "edgefn", out_dir = ".";
        std::vector<std::string> manifests;
        double speed = 1.0;
    };
    auto o = std::make_shared<RunOpts>();
    run->add_option("--bag", o->bag, "Input bag")->required()->check(CLI::ExistingFile);
    run->add_option("--manifests", o->manifests, "Function manifest files")->required()->check(CLI::ExistingFile);
    run->add_option("--plan", o->plan, "WARMUP_S,PHASES,PHASE_S")->capture_default_str();
    run->add_option("--speed", o->speed, "Replay rate multiplier")->capture_default_str()->check(CLI::PositiveNumber);
    run->add_option("--implementation", o->implementation, "Label for the implementation column")
        ->capture_default_str();
    run->add_option("--out-dir", o->out_dir, "Directory for rtt.csv, summary.txt and rtt.svg")->capture_default_str();
    run->callback([o] {
        double warmup = 0, length = 0;
        long phases = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ps(o->plan);
        if (!(ps >> warmup >> c1 >> phases >> c2 >> length) || c1 != ',' || c2 != ',' || !ps.eof())
            throw Failure{kExitUsage, "--plan expects WARMUP_S,PHASES,PHASE_S, got '" + o->plan + "'"};
        fs::create_directories(o->out_dir);
        const fs::path dir(o->out_dir);
        json manifests = json::array();
        for (const auto& m : o->manifests) manifests.push_back(fs::absolute(m).string());
        const json cfg = {{"bag", o->bag},
                          {"manifests", manifests},
                          {"plan", {{"warmup_s", warmup}, {"phase_count", phases}, {"phase_length_s", length}}},
                          {"speed", o->speed},
                          {"implementation", o->implementation},
                          {"csv", (dir / "rtt.csv").string()},
                          {"summary", (dir / "summary.txt").string()},
                          {"plot", (dir / "rtt.svg").string()}};
        Cancel cancel;
        char* raw = nullptr;
        check(edgefn_bench_run(cfg.dump().c_str(), cancel.handle, &raw));
        const json res = take_json(raw);
        std::cout << res["table"].get<std::string>();
        log(Level::info, std::to_string(res["rows"].get<std::size_t>()) + " RTT rows written to " +
                             (dir / "rtt.csv").string());
    });

    auto* stats = group->add_subcommand("stats", "Summarise an RTT CSV per function and phase");
    auto csv = std::make_shared<std::string>();
    stats->add_option("--csv", *csv, "RTT CSV file")->required()->check(CLI::ExistingFile);
    stats->callback([csv] {
        char* raw = nullptr;
        check(edgefn_bench_stats(csv->c_str(), &raw));
        std::cout << take_json(raw)["table"].get<std::string>();
    });

    auto* compare = group->add_subcommand("compare", "Mann-Whitney U test between two RTT CSV files");
    struct CmpOpts {
        std::string a, b, function;
    };
    auto c = std::make_shared<CmpOpts>();
    compare->add_option("--csv-a", c->a, "First CSV file")->required()->check(CLI::ExistingFile);
    compare->add_option("--csv-b", c->b, "Second CSV file")->required()->check(CLI::ExistingFile);
    compare->add_option("--function", c->function, "Only rows of this function");
    compare->callback([c] {
        char* raw = nullptr;
        check(edgefn_bench_compare(c->a.c_str(), c->b.c_str(), c->function.empty() ? nullptr : c->function.c_str(),
                                   &raw));
        std::cout << take_json(raw).dump(2) << '\n';
    });

    auto* cal = group->add_subcommand("calibrate", "Suggest roughness thresholds for a bag");
    struct CalOpts {
        std::string bag, imu_topic = "/sensors/imu", params;
    };
    auto k = std::make_shared<CalOpts>();
    cal->add_option("--bag", k->bag, "Input bag")->required()->check(CLI::ExistingFile);
    cal->add_option("--imu-topic", k->imu_topic, "IMU topic in the bag")->capture_default_str();
    cal->add_option("--params", k->params, "imu_fft parameters as a JSON object");
    cal->callback([k] {
        char* raw = nullptr;
        check(edgefn_bench_calibrate(k->bag.c_str(), k->imu_topic.c_str(),
                                     k->params.empty() ? nullptr : k->params.c_str(), &raw));
        std::cout << take_json(raw).dump(2) << '\n';
    });
}

void add_misc(CLI::App& app, const Globals& g) {
    auto* plot = app.add_subcommand("plot", "Render RTT box plots from a CSV file as SVG");
    auto po = std::make_shared<std::pair<std::string, std::string>>("", "rtt.svg");
    plot->add_option("--csv", po->first, "RTT CSV file")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", po->second, "Output SVG path")->capture_default_str();
    plot->callback([po] { check(edgefn_plot(po->first.c_str(), po->second.c_str())); });

    auto* transport = app.add_subcommand("transport", "Message bus");
    transport->require_subcommand(1);
    auto* serve = transport->add_subcommand("serve", "Serve a message bus until interrupted");
    auto listen = std::make_shared<std::string>();
    serve->add_option("--listen", *listen, "Endpoint to serve, unix:<path> or tcp:<host>:<port>")->required();
    serve->callback([listen] {
        edgefn_broker* b = nullptr;
        check(edgefn_broker_start(listen->c_str(), &b));
        std::cout << edgefn_broker_endpoint(b) << std::endl;
        SignalWatcher::instance().wait();
        edgefn_broker_destroy(b);
    });

    auto* recorder = app.add_subcommand("recorder", "Trigger action recorder");
    recorder->require_subcommand(1);
    auto* rrun = recorder->add_subcommand("run", "Write trigger actions as JSON lines until interrupted");
    auto out = std::make_shared<std::string>();
    rrun->add_option("--out", *out, "Append to this file instead of stdout");
    rrun->callback([out, &g] {
        Cancel cancel;
        check(edgefn_recorder_run(g.transport.c_str(), out->empty() ? nullptr : out->c_str(), cancel.handle));
    });
}

} // namespace

int main(int argc, char** argv) {
    SignalWatcher::instance().install();

    Globals g;
    CLI::App app{"edgefn: serverless functions for vehicle edge computers", "edgefn"};
    app.get_formatter()->column_width(42);
    app.set_version_flag("--version", std::string(edgefn_version()));
    app.set_help_all_flag("--help-all", "Print help for every subcommand");
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file with option values; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--log-level", g.log_level, "Diagnostic verbosity on stderr")
        ->capture_default_str()
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}))
        ->each([](const std::string& v) {
            static const std::map<std::string, Level> levels = {
                {"debug", Level::debug}, {"info", Level::info}, {"warn", Level::warn}, {"error", Level::error}};
            g_level = levels.at(v);
        });
    app.add_option("--transport", g.transport, "Message bus endpoint, or 'none' for a private in-process bus")
        ->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for commands that use randomness (negative: scenario default)")
        ->capture_default_str();

    add_registry(app);
    add_orchestrator(app, g);
    add_host(app, g);
    add_deploy(app);
    add_bag(app, g);
    add_bench(app);
    add_misc(app, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ConfigError& e) {
        std::string msg = e.what();
        const std::string ini = "INI was not able to parse ";
        if (msg.rfind(ini, 0) == 0) msg = "unknown config key '" + msg.substr(ini.size()) + "'";
        std::cerr << msg << '\n';
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    } catch (const Failure& f) {
        log(Level::error, f.message);
        return f.exit_code;
    } catch (const std::exception& e) {
        log(Level::error, e.what());
        return kExitRuntime;
    }
    return 0;
}
