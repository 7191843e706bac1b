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

#include "edgefn/host.hpp"

#include <filesystem>
#include <iostream>
#include <pthread.h>
#include <sched.h>
#include <unistd.h>

#include "edgefn/error.hpp"

namespace edgefn {

using json = nlohmann::json;
using namespace std::chrono_literals;

std::string_view host_state_name(HostState s) noexcept {
    switch (s) {
    case HostState::starting: return "starting";
    case HostState::running: return "running";
    case HostState::failed: return "failed";
    case HostState::stopped: return "stopped";
    }
    return "starting";
}

HostState host_state_from_name(std::string_view name) {
    if (name == "starting") return HostState::starting;
    if (name == "running") return HostState::running;
    if (name == "failed") return HostState::failed;
    if (name == "stopped") return HostState::stopped;
    throw Error(Errc::malformed, "unknown host state '" + std::string(name) + "'");
}

json HostStatus::to_json() const {
    json j = {{"function", function},
              {"state", host_state_name(state)},
              {"invocations", invocations},
              {"failures", failures},
              {"coalesced", coalesced},
              {"trigger_arrivals", trigger_arrivals},
              {"actions", actions},
              {"rtt_records", rtt_records},
              {"log_drops", log_drops},
              {"ingress", json::array()}};
    for (const auto& i : ingress) {
        json ij = {{"topic", i.topic},
                   {"class", channel_class_name(i.cls)},
                   {"arrivals", i.arrivals},
                   {"dropped", i.dropped},
                   {"transport_dropped", i.transport_dropped}};
        if (i.pool) {
            ij["frames_ingested"] = i.pool->frames_ingested;
            ij["leases_granted_for_new_frames"] = i.pool->leases_granted_for_new_frames;
            ij["drop_count"] = i.pool->drop_count;
            ij["leases"] = i.leases;
        }
        j["ingress"].push_back(std::move(ij));
    }
    j["last_error"] = last_error ? json(*last_error) : json(nullptr);
    return j;
}

HostStatus HostStatus::from_json(const json& j) {
    HostStatus s;
    s.function = j.at("function").get<std::string>();
    s.state = host_state_from_name(j.at("state").get<std::string>());
    s.invocations = j.value("invocations", 0ull);
    s.failures = j.value("failures", 0ull);
    s.coalesced = j.value("coalesced", 0ull);
    s.trigger_arrivals = j.value("trigger_arrivals", 0ull);
    s.actions = j.value("actions", 0ull);
    s.rtt_records = j.value("rtt_records", 0ull);
    s.log_drops = j.value("log_drops", 0ull);
    for (const auto& ij : j.value("ingress", json::array())) {
        IngressStatus i;
        i.topic = ij.at("topic").get<std::string>();
        i.cls = channel_class_from_name(ij.at("class").get<std::string>());
        i.arrivals = ij.value("arrivals", 0ull);
        i.dropped = ij.value("dropped", 0ull);
        i.transport_dropped = ij.value("transport_dropped", 0ull);
        if (ij.contains("frames_ingested"))
            i.pool = PoolCounters{ij["frames_ingested"], ij["leases_granted_for_new_frames"], ij["drop_count"], 0};
        i.leases = ij.value("leases", 0ull);
        s.ingress.push_back(std::move(i));
    }
    if (j.contains("last_error") && !j["last_error"].is_null()) s.last_error = j["last_error"].get<std::string>();
    return s;
}

// --- Sinks -----------------------------------------------------------------

void StdoutSink::on_log(const LogRecord& record) {
    std::lock_guard lk(mu_);
    std::cout << json{{"log", to_json(record)}}.dump() << '\n' << std::flush;
}

void StdoutSink::on_status(const HostStatus& status) {
    std::lock_guard lk(mu_);
    std::cout << json{{"status", status.to_json()}}.dump() << '\n' << std::flush;
}

ChannelSink::ChannelSink(const Endpoint& ep, std::string function) : channel_(ControlChannel::connect(ep)) {
    channel_.send({ControlType::hello, channel_.next_id(), {{"function", function}, {"pid", ::getpid()}}});
}

void ChannelSink::on_log(const LogRecord& record) {
    channel_.send({ControlType::log, channel_.next_id(), {{"records", json::array({to_json(record)})}}});
}

void ChannelSink::on_status(const HostStatus& status) {
    channel_.send({ControlType::status, channel_.next_id(), status.to_json()});
}

void MemorySink::on_log(const LogRecord& record) {
    std::lock_guard lk(mu_);
    logs_.push_back(record);
}

void MemorySink::on_status(const HostStatus& status) {
    std::lock_guard lk(mu_);
    statuses_.push_back(status);
}

std::vector<LogRecord> MemorySink::logs() const {
    std::lock_guard lk(mu_);
    return logs_;
}

std::vector<HostStatus> MemorySink::statuses() const {
    std::lock_guard lk(mu_);
    return statuses_;
}

// --- LogChannel ------------------------------------------------------------

LogChannel::LogChannel(std::shared_ptr<HostSink> sink, std::size_t capacity,
                       std::function<HostStatus()> status_source, std::chrono::milliseconds status_interval)
    : sink_(std::move(sink)),
      capacity_(capacity),
      status_source_(std::move(status_source)),
      status_interval_(status_interval) {
    writer_ = std::thread([this] { writer_loop(); });
}

LogChannel::~LogChannel() { close(); }

bool LogChannel::post(LogRecord record) {
    {
        std::lock_guard lk(mu_);
        if (closing_ || queue_.size() >= capacity_) {
            drops_.fetch_add(1, std::memory_order_relaxed);
            return false;
        }
        queue_.push_back(std::move(record));
    }
    cv_.notify_one();
    return true;
}

void LogChannel::post_status_now() {
    {
        std::lock_guard lk(mu_);
        status_requested_ = true;
    }
    cv_.notify_one();
}

void LogChannel::close() {
    {
        std::lock_guard lk(mu_);
        if (closing_ && !writer_.joinable()) return;
        closing_ = true;
    }
    cv_.notify_one();
    if (writer_.joinable()) writer_.join();
}

void LogChannel::writer_loop() {
    auto next_status = std::chrono::steady_clock::now() + status_interval_;
    std::unique_lock lk(mu_);
    for (;;) {
        cv_.wait_until(lk, next_status, [&] { return closing_ || status_requested_ || !queue_.empty(); });
        std::deque<LogRecord> batch;
        batch.swap(queue_);
        const bool send_status = status_requested_ || closing_ || std::chrono::steady_clock::now() >= next_status;
        status_requested_ = false;
        const bool done = closing_;
        lk.unlock();
        try {
            for (const auto& r : batch) sink_->on_log(r);
            if (send_status && status_source_) sink_->on_status(status_source_());
        } catch (const std::exception&) {
            // Sink gone (orchestrator restarted); records are lost, the host keeps running.
            drops_.fetch_add(batch.size(), std::memory_order_relaxed);
        }
        if (send_status) next_status = std::chrono::steady_clock::now() + status_interval_;
        lk.lock();
        if (done && queue_.empty()) return;
    }
}

// --- Host::ExecContext -----------------------------------------------------

class Host::ExecContext final : public Context {
public:
    explicit ExecContext(Host& host) : host_(host) {}

    void begin(const InvocationInfo& info) {
        info_ = info;
        thread_ = std::this_thread::get_id();
        active_ = true;
    }
    void end() { active_ = false; }

    std::optional<LatestItem> latest(std::string_view topic) override {
        check();
        return host_.hub_->latest(topic);
    }

    std::vector<RingRecord> window(std::string_view topic, std::size_t n) override {
        check();
        return host_.hub_->window(topic, n);
    }

    void trigger(const TriggerRequest& request) override {
        check();
        TriggerAction action;
        action.action = request.action;
        action.label = request.label;
        action.function = host_.manifest_.name;
        action.cause_seq = request.cause_seq ? request.cause_seq : info_.cause_seq;
        // t_out is stamped before anything is sent, so publishing cost is not
        // part of the measured interval.
        action.decision_ts = monotonic_now();
        host_.transport_->publish(kActionsTopic, make_payload(json_bytes(to_json(action))),
                                  ContentType::trigger_action, action.decision_ts);
        host_.actions_.fetch_add(1, std::memory_order_relaxed);
        if (host_.options_.instrument_rtt) {
            RttRecord rec{host_.manifest_.name, action.cause_seq.value_or(0), info_.t_in, action.decision_ts};
            host_.transport_->publish(kRttTopic, make_payload(json_bytes(to_json(rec))), ContentType::rtt_record,
                                      info_.t_in);
            host_.rtt_records_.fetch_add(1, std::memory_order_relaxed);
        }
    }

    Tensors infer(std::string_view model_ref, const Tensors& inputs) override {
        check();
        auto& backend = host_.options_.backend;
        auto it = models_.find(model_ref);
        if (it == models_.end()) it = models_.emplace(std::string(model_ref), backend->load(model_ref)).first;
        return backend->run(it->second, inputs);
    }

    void log(LogLevel level, std::string_view message) override {
        host_.logs_->post(LogRecord{level, monotonic_now(), host_.manifest_.name,
                                    cap_log_message(std::string(message))});
    }

    const InvocationInfo& info() const override { return info_; }
    const std::string& function_name() const override { return host_.manifest_.name; }

private:
    void check() const {
        if (!active_ || std::this_thread::get_id() != thread_)
            throw Error(Errc::outside_invocation, "context used outside an invocation");
    }

    Host& host_;
    InvocationInfo info_;
    std::thread::id thread_;
    bool active_ = false;
    std::map<std::string, ModelHandle, std::less<>> models_;
};

// --- Host ------------------------------------------------------------------

Host::Host(const FunctionManifest& manifest, std::shared_ptr<Transport> transport, HostOptions options)
    : manifest_(manifest), transport_(std::move(transport)), options_(std::move(options)) {
    manifest_.validate();
    if (!transport_) throw Error(Errc::invalid_argument, "host needs a transport");
    if (!options_.backend) options_.backend = make_default_backend();
    if (!options_.sink) options_.sink = std::make_shared<StdoutSink>();
    hub_ = std::make_unique<IngressHub>(manifest_.mode == ScheduleMode::event
                                            ? std::optional<std::string>(manifest_.trigger_topic)
                                            : std::nullopt);
    ctx_ = std::make_unique<ExecContext>(*this);
    logs_ = std::make_unique<LogChannel>(options_.sink, options_.log_capacity, [this] { return status(); },
                                         options_.status_interval);
}

Host::~Host() {
    stop();
    hub_->stop();
    logs_->close();
}

std::unique_ptr<Host> Host::load(const FunctionManifest& manifest, std::shared_ptr<Transport> transport,
                                 HostOptions options) {
    manifest.validate();
    if (manifest.entry_kind == FunctionManifest::EntryKind::native) {
        auto body = BuiltinRegistry::instance().create(manifest.entry_ref);
        return load_with_body(manifest, std::move(body), std::move(transport), std::move(options));
    }
    std::unique_ptr<Host> host(new Host(manifest, std::move(transport), std::move(options)));
    std::unique_ptr<FunctionBody> body;
    try {
        auto runtime = guest_runtime();
        if (!std::filesystem::exists(manifest.entry_ref))
            throw Error(Errc::guest_load_failure, "guest package '" + manifest.entry_ref + "' not found");
        if (!runtime) throw Error(Errc::guest_load_failure, "no guest runtime is available in this build");
        body = runtime->load(manifest.entry_ref);
        if (!body) throw Error(Errc::guest_load_failure, "guest runtime returned no function");
    } catch (const std::exception& e) {
        host->fail(e.what());
        return host;
    }
    host->attach_subscriptions();
    try {
        host->setup_body(std::move(body));
    } catch (const std::exception& e) {
        host->fail(std::string("guest setup failed: ") + e.what());
    }
    return host;
}

std::unique_ptr<Host> Host::load_with_body(const FunctionManifest& manifest, std::unique_ptr<FunctionBody> body,
                                           std::shared_ptr<Transport> transport, HostOptions options) {
    if (!body) throw Error(Errc::invalid_argument, "null function body");
    std::unique_ptr<Host> host(new Host(manifest, std::move(transport), std::move(options)));
    host->attach_subscriptions();
    try {
        host->setup_body(std::move(body));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(Errc::invalid_manifest, std::string("setup rejected params: ") + e.what());
    }
    return host;
}

void Host::attach_subscriptions() {
    for (const auto& s : manifest_.subscriptions)
        hub_->attach(transport_->subscribe(s.topic, s.qos), s.cls, s.depth_or_slots, s.slot_size);
}

void Host::setup_body(std::unique_ptr<FunctionBody> body) {
    body->setup(manifest_.params);
    body_ = std::move(body);
    state_ = HostState::running;
    logs_->post_status_now();
}

void Host::fail(const std::string& message) {
    {
        std::lock_guard lk(error_mu_);
        last_error_ = message;
    }
    state_ = HostState::failed;
    logs_->post(LogRecord{LogLevel::error, monotonic_now(), manifest_.name, cap_log_message(message)});
    logs_->post_status_now();
}

HostStatus Host::status() const {
    HostStatus s;
    s.function = manifest_.name;
    s.state = state_.load();
    s.invocations = invocations_.load();
    s.failures = failures_.load();
    s.coalesced = coalesced_.load();
    s.trigger_arrivals = hub_->trigger_arrivals();
    s.actions = actions_.load();
    s.rtt_records = rtt_records_.load();
    s.log_drops = logs_ ? logs_->drops() : 0;
    for (const auto& c : hub_->counters()) {
        IngressStatus i{c.topic, c.cls, c.arrivals, c.dropped, c.transport_dropped, std::nullopt, 0};
        if (auto pool = hub_->pool(c.topic)) {
            i.pool = pool->counters();
            i.leases = pool->total_leases();
        }
        s.ingress.push_back(std::move(i));
    }
    std::lock_guard lk(error_mu_);
    s.last_error = last_error_;
    return s;
}

void Host::stop() {
    {
        std::lock_guard lk(stop_mu_);
        stop_requested_ = true;
    }
    stop_cv_.notify_all();
    hub_->interrupt();
}

void Host::apply_affinity() {
    if (options_.affinity.empty()) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    for (int core : options_.affinity)
        if (core >= 0 && core < CPU_SETSIZE) CPU_SET(core, &set);
    // Best effort; unsupported or out-of-range cores leave scheduling unchanged.
    pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
}

void Host::invoke(const InvocationInfo& info) {
    ctx_->begin(info);
    try {
        body_->invoke(*ctx_);
    } catch (const AbortFunction& e) {
        ctx_->end();
        failures_.fetch_add(1);
        fatal_ = Error(Errc::aborted, e.what());
        fail(std::string("function aborted: ") + e.what());
        return;
    } catch (const Error& e) {
        ctx_->end();
        if (e.code() == Errc::shut_down) {
            fatal_ = e;
            fail(e.what());
            return;
        }
        failures_.fetch_add(1);
        {
            std::lock_guard lk(error_mu_);
            last_error_ = e.what();
        }
        logs_->post(LogRecord{LogLevel::error, monotonic_now(), manifest_.name, cap_log_message(e.what())});
    } catch (const std::exception& e) {
        ctx_->end();
        failures_.fetch_add(1);
        {
            std::lock_guard lk(error_mu_);
            last_error_ = e.what();
        }
        logs_->post(LogRecord{LogLevel::error, monotonic_now(), manifest_.name, cap_log_message(e.what())});
    }
    ctx_->end();
    invocations_.fetch_add(1);
}

void Host::run_event_loop() {
    std::uint64_t n = 0;
    while (!stop_requested_.load() && !fatal_) {
        const TriggerWakeup w = hub_->await_trigger(options_.poll_interval);
        if (!w.triggered()) {
            if (transport_->is_shut_down()) {
                fatal_ = Error(Errc::shut_down, "transport closed");
                fail("transport closed");
            }
            continue;
        }
        coalesced_.fetch_add(w.count - 1);
        invoke(InvocationInfo{++n, w.count, w.cause_seq, w.cause_source_ts});
    }
}

void Host::run_periodic_loop() {
    const Nanos period = Nanos(manifest_.period_ms) * 1'000'000;
    const Nanos t0 = monotonic_now();
    std::uint64_t k = 1;
    std::uint64_t n = 0;
    while (!fatal_) {
        const Nanos due = t0 + Nanos(k) * period;
        {
            std::unique_lock lk(stop_mu_);
            if (stop_cv_.wait_until(lk, to_time_point(due), [&] { return stop_requested_.load(); })) break;
        }
        invoke(InvocationInfo{++n, 0, std::nullopt, due});
        // Skip ticks that already passed; never run them back to back.
        const Nanos now = monotonic_now();
        k = std::max<std::uint64_t>(k + 1, static_cast<std::uint64_t>((now - t0) / period) + 1);
        if (transport_->is_shut_down()) {
            fatal_ = Error(Errc::shut_down, "transport closed");
            fail("transport closed");
        }
    }
}

void Host::run() {
    if (state_.load() == HostState::failed) {
        std::lock_guard lk(error_mu_);
        throw Error(Errc::guest_load_failure, last_error_.value_or("host failed to load"));
    }
    apply_affinity();
    if (manifest_.mode == ScheduleMode::event)
        run_event_loop();
    else
        run_periodic_loop();
    if (fatal_) {
        logs_->post_status_now();
        throw *fatal_;
    }
    state_ = HostState::stopped;
    logs_->post_status_now();
}

} // namespace edgefn
