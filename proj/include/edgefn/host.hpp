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
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/context.hpp"
#include "edgefn/control.hpp"
#include "edgefn/ingress.hpp"
#include "edgefn/manifest.hpp"
#include "edgefn/transport.hpp"

namespace edgefn {

enum class HostState { starting, running, failed, stopped };
std::string_view host_state_name(HostState s) noexcept;
HostState host_state_from_name(std::string_view name);

struct IngressStatus {
    std::string topic;
    ChannelClass cls = ChannelClass::low_volume;
    std::uint64_t arrivals = 0;
    std::uint64_t dropped = 0;
    std::uint64_t transport_dropped = 0;
    std::optional<PoolCounters> pool;
    std::uint64_t leases = 0;
};

struct HostStatus {
    std::string function;
    HostState state = HostState::starting;
    std::uint64_t invocations = 0;
    std::uint64_t failures = 0;
    std::uint64_t coalesced = 0;
    std::uint64_t trigger_arrivals = 0;
    std::uint64_t actions = 0;
    std::uint64_t rtt_records = 0;
    std::uint64_t log_drops = 0;
    std::vector<IngressStatus> ingress;
    std::optional<std::string> last_error;

    nlohmann::json to_json() const;
    static HostStatus from_json(const nlohmann::json& j);
};

// Where a host's logs and status updates end up.
class HostSink {
public:
    virtual ~HostSink() = default;
    virtual void on_log(const LogRecord& record) = 0;
    virtual void on_status(const HostStatus& status) = 0;
};

// JSON lines on standard output (standalone mode).
class StdoutSink final : public HostSink {
public:
    void on_log(const LogRecord& record) override;
    void on_status(const HostStatus& status) override;

private:
    std::mutex mu_;
};

// Control envelopes to the orchestrator's host listener. The first message is
// a hello carrying the function name and process id.
class ChannelSink final : public HostSink {
public:
    ChannelSink(const Endpoint& ep, std::string function);
    void on_log(const LogRecord& record) override;
    void on_status(const HostStatus& status) override;

private:
    ControlChannel channel_;
};

// Keeps everything in memory; for tests and embedding.
class MemorySink final : public HostSink {
public:
    void on_log(const LogRecord& record) override;
    void on_status(const HostStatus& status) override;

    std::vector<LogRecord> logs() const;
    std::vector<HostStatus> statuses() const;

private:
    mutable std::mutex mu_;
    std::vector<LogRecord> logs_;
    std::vector<HostStatus> statuses_;
};

// Bounded queue in front of a sink, drained by one writer thread. post()
// never blocks; records beyond capacity are dropped and counted. The writer
// also publishes a status snapshot every `status_interval`.
class LogChannel {
public:
    LogChannel(std::shared_ptr<HostSink> sink, std::size_t capacity,
               std::function<HostStatus()> status_source, std::chrono::milliseconds status_interval);
    ~LogChannel();
    LogChannel(const LogChannel&) = delete;
    LogChannel& operator=(const LogChannel&) = delete;

    bool post(LogRecord record);
    void post_status_now();
    // Drains pending records and sends a final status.
    void close();
    std::uint64_t drops() const noexcept { return drops_.load(); }

private:
    void writer_loop();

    std::shared_ptr<HostSink> sink_;
    std::size_t capacity_;
    std::function<HostStatus()> status_source_;
    std::chrono::milliseconds status_interval_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<LogRecord> queue_;
    bool status_requested_ = false;
    bool closing_ = false;
    std::atomic<std::uint64_t> drops_{0};
    std::thread writer_;
};

struct HostOptions {
    bool instrument_rtt = false;
    std::vector<int> affinity;
    std::shared_ptr<InferenceBackend> backend;
    std::shared_ptr<HostSink> sink;
    std::size_t log_capacity = 1024;
    std::chrono::milliseconds status_interval{1000};
    // How long one await_trigger blocks before re-checking for stop.
    std::chrono::milliseconds poll_interval{100};
};

// Runtime for one lambda function: builds the ingress hub from the manifest's
// subscriptions and drives the body in periodic or event-driven mode on the
// thread that calls run().
class Host {
public:
    // Throws invalid_manifest or unknown_builtin. A guest entry that cannot be
    // loaded yields a host in the failed state with last_error set.
    static std::unique_ptr<Host> load(const FunctionManifest& manifest, std::shared_ptr<Transport> transport,
                                      HostOptions options = {});
    // Uses the given body instead of resolving the manifest entry.
    static std::unique_ptr<Host> load_with_body(const FunctionManifest& manifest,
                                                std::unique_ptr<FunctionBody> body,
                                                std::shared_ptr<Transport> transport, HostOptions options = {});
    ~Host();
    Host(const Host&) = delete;
    Host& operator=(const Host&) = delete;

    // Blocks until stop() or a fatal error. Throws when the host failed to
    // load or the loop ended fatally.
    void run();
    void stop();

    HostStatus status() const;
    HostState state() const noexcept { return state_.load(); }
    const FunctionManifest& manifest() const noexcept { return manifest_; }
    IngressHub& hub() noexcept { return *hub_; }
    FunctionBody* body() noexcept { return body_.get(); }

private:
    class ExecContext;

    Host(const FunctionManifest& manifest, std::shared_ptr<Transport> transport, HostOptions options);
    void attach_subscriptions();
    void setup_body(std::unique_ptr<FunctionBody> body);
    void fail(const std::string& message);
    void invoke(const InvocationInfo& info);
    void run_event_loop();
    void run_periodic_loop();
    void apply_affinity();

    FunctionManifest manifest_;
    std::shared_ptr<Transport> transport_;
    HostOptions options_;
    std::unique_ptr<IngressHub> hub_;
    std::unique_ptr<FunctionBody> body_;
    std::unique_ptr<LogChannel> logs_;
    std::unique_ptr<ExecContext> ctx_;

    std::atomic<HostState> state_{HostState::starting};
    std::atomic<bool> stop_requested_{false};
    std::mutex stop_mu_;
    std::condition_variable stop_cv_;

    std::atomic<std::uint64_t> invocations_{0};
    std::atomic<std::uint64_t> failures_{0};
    std::atomic<std::uint64_t> coalesced_{0};
    std::atomic<std::uint64_t> actions_{0};
    std::atomic<std::uint64_t> rtt_records_{0};
    mutable std::mutex error_mu_;
    std::optional<std::string> last_error_;
    std::optional<Error> fatal_;
};

} // namespace edgefn
