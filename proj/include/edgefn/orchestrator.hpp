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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <sys/types.h>

#include <nlohmann/json.hpp>

#include "edgefn/broker.hpp"
#include "edgefn/control.hpp"
#include "edgefn/deploy.hpp"
#include "edgefn/host.hpp"

namespace edgefn {

using Millis = std::chrono::milliseconds;

// --- Synchronisation plan -----------------------------------------------------

struct SyncPlan {
    std::set<std::string> spawn;
    std::set<std::string> stop;
    std::set<std::string> keep;
    std::set<std::string> restart_changed;

    bool empty() const noexcept { return spawn.empty() && stop.empty() && restart_changed.empty(); }
};

// Exact set difference between what runs and what should run. Entries in both
// whose manifest or checksum differ land in restart_changed.
SyncPlan plan_sync(const std::map<std::string, DeployedFunction>& current, const DesiredState& desired);

// --- Supervision --------------------------------------------------------------

enum class ProcessState { spawning, up, backing_off, stopped, failed_permanent };
std::string_view process_state_name(ProcessState s) noexcept;

struct BackoffPolicy {
    Millis initial{500};
    double factor = 2.0;
    Millis cap{30000};
    std::size_t max_restarts = 10;
    Millis window{std::chrono::hours(1)};
    // A host that stayed up this long resets the delay to `initial`.
    Millis healthy_uptime{60000};
    // Multiplies every duration above; tests shrink the schedule with it.
    double time_scale = 1.0;

    // Unscaled delay before restart number `attempt` (0-based).
    Millis delay(std::size_t attempt) const;
    Millis scaled(Millis d) const;
};

struct ManagedProcess {
    std::string name;
    pid_t pid = -1;
    ProcessState state = ProcessState::spawning;
    std::size_t restart_count = 0;
    Millis next_delay{0};
    // Nominal (unscaled) delay that preceded each restart, in order.
    std::vector<Millis> restart_delays;
    std::string last_exit;
    std::string checksum;

    nlohmann::json to_json() const;
};

struct SupervisorOptions {
    // Host executable plus leading arguments; the supervisor appends
    // --manifest, --transport, --orchestrator-channel and --instrument-rtt.
    std::vector<std::string> host_command;
    std::filesystem::path data_root;
    std::string transport = "none";
    std::string orchestrator_channel = "none";
    bool instrument_rtt = false;
    BackoffPolicy backoff;
    Millis grace{5000};
    Millis poll{5};
};

// Fetches a package blob by checksum; throws when it cannot.
using PackageFetcher = std::function<Bytes(const std::string& checksum)>;

// Owns one host process per deployed function. A single supervision thread
// reaps exits and schedules restarts; apply() and stop_all() may be called
// from any one other thread at a time.
class Supervisor {
public:
    explicit Supervisor(SupervisorOptions options);
    ~Supervisor();
    Supervisor(const Supervisor&) = delete;
    Supervisor& operator=(const Supervisor&) = delete;

    // Converges the process set to `desired`. Packages missing from the
    // staging area are fetched with `fetch`; a function whose package cannot
    // be staged goes straight to failed_permanent.
    SyncPlan apply(const DesiredState& desired, const PackageFetcher& fetch = {});
    void stop_all();

    std::vector<ManagedProcess> processes() const;
    std::optional<ManagedProcess> process(const std::string& name) const;
    // Names whose host process is currently up.
    std::set<std::string> running() const;
    std::uint64_t spawn_count() const noexcept { return spawns_.load(); }

    // Path of the staged package blob, if present and intact.
    std::optional<std::filesystem::path> staged(const std::string& checksum) const;
    std::filesystem::path stage(const std::string& checksum, const PackageFetcher& fetch) const;

private:
    struct Entry {
        ManagedProcess info;
        DeployedFunction function;
        std::filesystem::path manifest_path;
        std::chrono::steady_clock::time_point started;
        std::chrono::steady_clock::time_point restart_at;
        std::deque<std::chrono::steady_clock::time_point> restarts;
        std::size_t consecutive = 0;
    };

    void loop();
    void reap_locked();
    void on_exit_locked(Entry& e, int status);
    void spawn_locked(Entry& e);
    void terminate(std::vector<pid_t> pids);
    std::filesystem::path write_manifest(const DeployedFunction& f, const std::optional<std::filesystem::path>& blob);

    SupervisorOptions opts_;
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;
    std::mutex apply_mu_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> spawns_{0};
    std::thread thread_;
};

// --- Log relay ----------------------------------------------------------------

struct RelayOptions {
    std::size_t batch_size = 100;
    Millis flush_interval{500};
    std::size_t backlog = 10000;
};

// Bounded FIFO of log records headed upstream. Overflow drops the oldest.
class LogRelay {
public:
    explicit LogRelay(RelayOptions options = {});

    void push(nlohmann::json record);
    // A batch when one is due: batch_size records queued, or the oldest has
    // waited flush_interval. `force` returns whatever is queued.
    std::vector<nlohmann::json> take_batch(bool force = false);
    // Puts an unacknowledged batch back at the front, keeping order.
    void restore(std::vector<nlohmann::json> batch);

    std::size_t size() const;
    std::uint64_t dropped() const noexcept { return dropped_.load(); }
    std::uint64_t forwarded() const noexcept { return forwarded_.load(); }
    void mark_forwarded(std::size_t n) noexcept { forwarded_ += n; }

private:
    RelayOptions opts_;
    mutable std::mutex mu_;
    std::deque<nlohmann::json> queue_;
    std::chrono::steady_clock::time_point oldest_;
    std::atomic<std::uint64_t> dropped_{0};
    std::atomic<std::uint64_t> forwarded_{0};
};

// --- Orchestrator -------------------------------------------------------------

struct OrchestratorOptions {
    // Registry vehicle endpoint; nullopt runs from the cache only.
    std::optional<Endpoint> registry;
    std::string vehicle_id;
    std::string token;
    std::filesystem::path data_root;
    // Transport endpoint handed to hosts.
    std::string transport = "none";
    // When set, an embedded broker serves this endpoint and hosts use it.
    std::optional<Endpoint> serve_transport;
    std::vector<std::string> host_command;
    bool instrument_rtt = false;
    BackoffPolicy backoff;
    Millis grace{5000};
    RelayOptions relay;
    Millis status_interval{1000};
    Millis heartbeat_interval{5000};
    Millis reconnect_initial{200};
    Millis reconnect_cap{5000};
};

// Exit codes shared with the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitAuth = 3;

// Edge-side agent: keeps a registry connection, applies desired state through
// a Supervisor, collects host logs and status on a local listener and relays
// them upstream.
class Orchestrator {
public:
    explicit Orchestrator(OrchestratorOptions options);
    ~Orchestrator();
    Orchestrator(const Orchestrator&) = delete;
    Orchestrator& operator=(const Orchestrator&) = delete;

    void start();
    void stop();
    // Blocks until stop() or a fatal condition; returns an exit code.
    int wait();

    bool auth_rejected() const noexcept { return auth_rejected_.load(); }
    bool connected() const noexcept { return connected_.load(); }
    std::uint64_t applied_revision() const noexcept { return applied_revision_.load(); }
    Supervisor& supervisor() noexcept { return *supervisor_; }
    LogRelay& relay() noexcept { return relay_; }
    const Endpoint& host_endpoint() const noexcept { return host_ep_; }
    std::map<std::string, HostStatus> host_statuses() const;
    nlohmann::json status_json() const;

    // Path of the cached desired state.
    std::filesystem::path cache_path() const { return opts_.data_root / "desired.json"; }

private:
    void upstream_loop();
    bool session(ControlChannel& ch);
    void handle_desired(ControlChannel* ch, const DesiredState& desired, bool from_cache);
    Bytes fetch_package(ControlChannel& ch, const std::string& checksum);
    void host_accept_loop();
    void serve_host(std::shared_ptr<ControlChannel> ch);
    void sleep_for(Millis d);

    OrchestratorOptions opts_;
    std::shared_ptr<LocalTransport> bus_;
    std::unique_ptr<BrokerServer> broker_;
    std::unique_ptr<Supervisor> supervisor_;
    LogRelay relay_;
    Endpoint host_ep_;
    Socket host_listener_;

    std::atomic<bool> stopping_{false};
    std::atomic<bool> auth_rejected_{false};
    std::atomic<bool> connected_{false};
    std::atomic<std::uint64_t> applied_revision_{0};
    bool applied_any_ = false;

    // Envelopes read while waiting for a package reply, handled afterwards.
    std::deque<ControlEnvelope> deferred_;
    std::map<std::uint64_t, std::vector<nlohmann::json>> inflight_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, HostStatus> host_status_;
    std::vector<std::shared_ptr<ControlChannel>> host_channels_;
    std::vector<std::thread> host_threads_;
    std::thread host_acceptor_;
    std::thread upstream_;
    bool done_ = false;
};

} // namespace edgefn
