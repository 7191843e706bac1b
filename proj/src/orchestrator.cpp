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

#include "edgefn/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <iterator>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "edgefn/clock.hpp"
#include "edgefn/crypto.hpp"
#include "edgefn/error.hpp"

extern char** environ;

namespace edgefn {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

void write_file_atomic(const fs::path& path, std::string_view text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) throw Error(Errc::io_failure, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string describe_exit(int status) {
    if (WIFEXITED(status)) return "exit " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return std::string("signal ") + ::strsignal(WTERMSIG(status));
    return "status " + std::to_string(status);
}

json orchestrator_log(LogLevel level, const std::string& message) {
    return to_json(LogRecord{level, monotonic_now(), "orchestrator", message});
}

} // namespace

// --- plan ---------------------------------------------------------------------

SyncPlan plan_sync(const std::map<std::string, DeployedFunction>& current, const DesiredState& desired) {
    SyncPlan plan;
    std::set<std::string> wanted;
    for (const auto& f : desired.functions) {
        wanted.insert(f.manifest.name);
        auto it = current.find(f.manifest.name);
        if (it == current.end())
            plan.spawn.insert(f.manifest.name);
        else if (it->second.same_as(f))
            plan.keep.insert(f.manifest.name);
        else
            plan.restart_changed.insert(f.manifest.name);
    }
    for (const auto& [name, _] : current)
        if (!wanted.count(name)) plan.stop.insert(name);
    return plan;
}

// --- backoff ------------------------------------------------------------------

std::string_view process_state_name(ProcessState s) noexcept {
    switch (s) {
    case ProcessState::spawning: return "spawning";
    case ProcessState::up: return "up";
    case ProcessState::backing_off: return "backing_off";
    case ProcessState::stopped: return "stopped";
    case ProcessState::failed_permanent: return "failed_permanent";
    }
    return "unknown";
}

Millis BackoffPolicy::delay(std::size_t attempt) const {
    const double ms = static_cast<double>(initial.count()) * std::pow(factor, static_cast<double>(attempt));
    return std::min(cap, Millis(static_cast<Millis::rep>(std::min(ms, static_cast<double>(cap.count())))));
}

Millis BackoffPolicy::scaled(Millis d) const {
    return Millis(static_cast<Millis::rep>(std::llround(static_cast<double>(d.count()) * time_scale)));
}

json ManagedProcess::to_json() const {
    json delays = json::array();
    for (auto d : restart_delays) delays.push_back(d.count());
    return {{"name", name},
            {"pid", pid},
            {"state", process_state_name(state)},
            {"restart_count", restart_count},
            {"next_delay_ms", next_delay.count()},
            {"restart_delays_ms", delays},
            {"last_exit", last_exit},
            {"checksum", checksum}};
}

// --- supervisor ---------------------------------------------------------------

Supervisor::Supervisor(SupervisorOptions options) : opts_(std::move(options)) {
    if (opts_.host_command.empty()) throw Error(Errc::invalid_argument, "host command is empty");
    fs::create_directories(opts_.data_root / "run");
    fs::create_directories(opts_.data_root / "packages");
    thread_ = std::thread([this] { loop(); });
}

Supervisor::~Supervisor() {
    stop_all();
    stopping_ = true;
    if (thread_.joinable()) thread_.join();
}

std::optional<fs::path> Supervisor::staged(const std::string& checksum) const {
    if (checksum.size() != 64 || checksum.find_first_not_of("0123456789abcdef") != std::string::npos)
        return std::nullopt;
    const fs::path blob = opts_.data_root / "packages" / checksum / "blob";
    if (!fs::exists(blob) || sha256_hex(read_file(blob)) != checksum) return std::nullopt;
    return blob;
}

fs::path Supervisor::stage(const std::string& checksum, const PackageFetcher& fetch) const {
    if (auto p = staged(checksum)) return *p;
    if (!fetch) throw Error(Errc::unknown_package, "package " + checksum + " is not staged");
    const Bytes blob = fetch(checksum);
    if (sha256_hex(blob) != checksum) throw Error(Errc::checksum_mismatch, "fetched blob for " + checksum);
    const fs::path dir = opts_.data_root / "packages" / checksum;
    fs::create_directories(dir);
    write_file_atomic(dir / "blob", std::string_view(reinterpret_cast<const char*>(blob.data()), blob.size()));
    return dir / "blob";
}

fs::path Supervisor::write_manifest(const DeployedFunction& f, const std::optional<fs::path>& blob) {
    FunctionManifest m = f.manifest;
    if (m.name.find('/') != std::string::npos || m.name.rfind('.', 0) == 0)
        throw Error(Errc::invalid_manifest, "function name '" + m.name + "' is not a file name");
    if (f.kind == PackageKind::guest_archive && blob) m.entry_ref = blob->string();
    const fs::path path = opts_.data_root / "run" / (m.name + ".json");
    write_file_atomic(path, to_json(m).dump(2));
    return path;
}

SyncPlan Supervisor::apply(const DesiredState& desired, const PackageFetcher& fetch) {
    desired.validate();
    std::lock_guard apply_lk(apply_mu_);
    std::map<std::string, DeployedFunction> current;
    {
        std::lock_guard lk(mu_);
        for (const auto& [name, e] : entries_) current.emplace(name, e.function);
    }
    const SyncPlan plan = plan_sync(current, desired);

    std::vector<pid_t> victims;
    {
        std::lock_guard lk(mu_);
        auto retire = [&](const std::string& name) {
            auto it = entries_.find(name);
            if (it == entries_.end()) return;
            if (it->second.info.pid > 0) victims.push_back(it->second.info.pid);
            entries_.erase(it);
        };
        for (const auto& n : plan.stop) retire(n);
        for (const auto& n : plan.restart_changed) retire(n);
    }
    // Old instances are gone before replacements start, so a name never has
    // two live hosts.
    terminate(std::move(victims));

    std::vector<std::string> starting(plan.spawn.begin(), plan.spawn.end());
    starting.insert(starting.end(), plan.restart_changed.begin(), plan.restart_changed.end());
    for (const auto& name : starting) {
        const DeployedFunction& f = *desired.find(name);
        Entry e;
        e.function = f;
        e.info.name = name;
        e.info.checksum = f.checksum;
        try {
            const fs::path blob = stage(f.checksum, fetch);
            e.manifest_path = write_manifest(f, blob);
        } catch (const std::exception& ex) {
            e.info.state = ProcessState::failed_permanent;
            e.info.last_exit = std::string("staging-missing: ") + ex.what();
            std::lock_guard lk(mu_);
            entries_[name] = std::move(e);
            continue;
        }
        std::lock_guard lk(mu_);
        auto& slot = entries_[name] = std::move(e);
        spawn_locked(slot);
    }
    return plan;
}

void Supervisor::stop_all() {
    std::lock_guard apply_lk(apply_mu_);
    std::vector<pid_t> victims;
    {
        std::lock_guard lk(mu_);
        for (auto& [_, e] : entries_)
            if (e.info.pid > 0) victims.push_back(e.info.pid);
        entries_.clear();
    }
    terminate(std::move(victims));
}

void Supervisor::terminate(std::vector<pid_t> pids) {
    for (pid_t p : pids) ::kill(p, SIGTERM);
    const auto deadline = Clock::now() + opts_.grace;
    while (!pids.empty() && Clock::now() < deadline) {
        pids.erase(std::remove_if(pids.begin(), pids.end(),
                                  [](pid_t p) {
                                      int st = 0;
                                      return ::waitpid(p, &st, WNOHANG) != 0;
                                  }),
                   pids.end());
        if (!pids.empty()) std::this_thread::sleep_for(Millis(2));
    }
    for (pid_t p : pids) {
        ::kill(p, SIGKILL);
        int st = 0;
        ::waitpid(p, &st, 0);
    }
}

void Supervisor::spawn_locked(Entry& e) {
    std::vector<std::string> args = opts_.host_command;
    args.insert(args.end(), {"--manifest", e.manifest_path.string(), "--transport", opts_.transport,
                             "--orchestrator-channel", opts_.orchestrator_channel, "--instrument-rtt",
                             opts_.instrument_rtt ? "true" : "false"});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    // Children start with default dispositions and an empty mask, whatever
    // the calling thread had blocked for its own signal handling.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    sigset_t none, defaults;
    sigemptyset(&none);
    sigemptyset(&defaults);
    for (int s : {SIGTERM, SIGINT, SIGHUP, SIGPIPE, SIGCHLD}) sigaddset(&defaults, s);
    posix_spawnattr_setsigmask(&attr, &none);
    posix_spawnattr_setsigdefault(&attr, &defaults);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);
    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, argv[0], nullptr, &attr, argv.data(), environ);
    posix_spawnattr_destroy(&attr);

    e.started = Clock::now();
    if (rc != 0) {
        e.info.pid = -1;
        e.info.last_exit = std::string("spawn-failure: ") + std::strerror(rc);
        on_exit_locked(e, -1);
        return;
    }
    ++spawns_;
    e.info.pid = pid;
    e.info.state = ProcessState::up;
}

void Supervisor::on_exit_locked(Entry& e, int status) {
    const auto now = Clock::now();
    if (status >= 0) e.info.last_exit = describe_exit(status);
    e.info.pid = -1;
    if (now - e.started >= opts_.backoff.scaled(opts_.backoff.healthy_uptime)) e.consecutive = 0;
    const auto horizon = now - opts_.backoff.scaled(opts_.backoff.window);
    while (!e.restarts.empty() && e.restarts.front() < horizon) e.restarts.pop_front();
    if (e.restarts.size() >= opts_.backoff.max_restarts) {
        e.info.state = ProcessState::failed_permanent;
        e.info.next_delay = Millis(0);
        return;
    }
    e.info.next_delay = opts_.backoff.delay(e.consecutive++);
    e.info.state = ProcessState::backing_off;
    e.restart_at = now + opts_.backoff.scaled(e.info.next_delay);
}

void Supervisor::reap_locked() {
    for (auto& [_, e] : entries_) {
        if (e.info.pid <= 0) continue;
        int status = 0;
        if (::waitpid(e.info.pid, &status, WNOHANG) == e.info.pid) on_exit_locked(e, status);
    }
}

void Supervisor::loop() {
    while (!stopping_.load()) {
        {
            std::lock_guard lk(mu_);
            reap_locked();
            const auto now = Clock::now();
            for (auto& [_, e] : entries_) {
                if (e.info.state != ProcessState::backing_off || e.restart_at > now) continue;
                e.restarts.push_back(now);
                ++e.info.restart_count;
                e.info.restart_delays.push_back(e.info.next_delay);
                spawn_locked(e);
            }
        }
        std::this_thread::sleep_for(opts_.poll);
    }
}

std::vector<ManagedProcess> Supervisor::processes() const {
    std::lock_guard lk(mu_);
    std::vector<ManagedProcess> out;
    for (const auto& [_, e] : entries_) out.push_back(e.info);
    return out;
}

std::optional<ManagedProcess> Supervisor::process(const std::string& name) const {
    std::lock_guard lk(mu_);
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second.info;
}

std::set<std::string> Supervisor::running() const {
    std::lock_guard lk(mu_);
    std::set<std::string> out;
    for (const auto& [name, e] : entries_)
        if (e.info.state == ProcessState::up) out.insert(name);
    return out;
}

// --- relay --------------------------------------------------------------------

LogRelay::LogRelay(RelayOptions options) : opts_(options) {
    if (opts_.batch_size == 0 || opts_.backlog == 0) throw Error(Errc::invalid_argument, "relay sizes must be > 0");
}

void LogRelay::push(json record) {
    std::lock_guard lk(mu_);
    if (queue_.empty()) oldest_ = Clock::now();
    queue_.push_back(std::move(record));
    while (queue_.size() > opts_.backlog) {
        queue_.pop_front();
        ++dropped_;
    }
}

std::vector<json> LogRelay::take_batch(bool force) {
    std::lock_guard lk(mu_);
    if (queue_.empty()) return {};
    const bool due = force || queue_.size() >= opts_.batch_size || Clock::now() - oldest_ >= opts_.flush_interval;
    if (!due) return {};
    const std::size_t n = std::min(queue_.size(), opts_.batch_size);
    std::vector<json> batch(std::make_move_iterator(queue_.begin()),
                            std::make_move_iterator(queue_.begin() + static_cast<std::ptrdiff_t>(n)));
    queue_.erase(queue_.begin(), queue_.begin() + static_cast<std::ptrdiff_t>(n));
    // Records left behind are overdue already, so they go out on the next call.
    if (!queue_.empty()) oldest_ = Clock::now() - opts_.flush_interval;
    return batch;
}

void LogRelay::restore(std::vector<json> batch) {
    std::lock_guard lk(mu_);
    for (auto it = batch.rbegin(); it != batch.rend(); ++it) queue_.push_front(std::move(*it));
    while (queue_.size() > opts_.backlog) {
        queue_.pop_front();
        ++dropped_;
    }
    if (!queue_.empty()) oldest_ = Clock::now() - opts_.flush_interval;
}

std::size_t LogRelay::size() const {
    std::lock_guard lk(mu_);
    return queue_.size();
}

// --- orchestrator -------------------------------------------------------------

Orchestrator::Orchestrator(OrchestratorOptions options) : opts_(std::move(options)), relay_(opts_.relay) {
    if (opts_.vehicle_id.empty()) throw Error(Errc::invalid_argument, "vehicle id is required");
    fs::create_directories(opts_.data_root / "run");
    host_ep_ = Endpoint::parse("unix:" + (opts_.data_root / "run" / "host.sock").string());

    std::string transport = opts_.transport;
    if (opts_.serve_transport) {
        bus_ = std::make_shared<LocalTransport>();
        broker_ = std::make_unique<BrokerServer>(bus_, *opts_.serve_transport);
        transport = broker_->endpoint().str();
    }
    SupervisorOptions sup;
    sup.host_command = opts_.host_command;
    sup.data_root = opts_.data_root;
    sup.transport = transport;
    sup.orchestrator_channel = host_ep_.str();
    sup.instrument_rtt = opts_.instrument_rtt;
    sup.backoff = opts_.backoff;
    sup.grace = opts_.grace;
    supervisor_ = std::make_unique<Supervisor>(std::move(sup));
}

Orchestrator::~Orchestrator() { stop(); }

void Orchestrator::start() {
    host_listener_ = Socket::listen(host_ep_);
    host_acceptor_ = std::thread([this] { host_accept_loop(); });
    upstream_ = std::thread([this] { upstream_loop(); });
}

void Orchestrator::stop() {
    {
        std::lock_guard lk(mu_);
        if (stopping_.exchange(true)) return;
    }
    cv_.notify_all();
    if (upstream_.joinable()) upstream_.join();
    supervisor_->stop_all();
    if (host_acceptor_.joinable()) host_acceptor_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lk(mu_);
        for (auto& ch : host_channels_) ch->close();
        threads.swap(host_threads_);
    }
    for (auto& t : threads) t.join();
    host_listener_.close();
    ::unlink(host_ep_.path.c_str());
    if (broker_) broker_->stop();
    {
        std::lock_guard lk(mu_);
        done_ = true;
    }
    cv_.notify_all();
}

int Orchestrator::wait() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return stopping_.load() || auth_rejected_.load(); });
    return auth_rejected_.load() ? kExitAuth : kExitOk;
}

void Orchestrator::sleep_for(Millis d) {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, d, [&] { return stopping_.load(); });
}

std::map<std::string, HostStatus> Orchestrator::host_statuses() const {
    std::lock_guard lk(mu_);
    return host_status_;
}

json Orchestrator::status_json() const {
    json procs = json::array();
    for (const auto& p : supervisor_->processes()) procs.push_back(p.to_json());
    json hosts = json::object();
    for (const auto& [name, s] : host_statuses()) hosts[name] = s.to_json();
    return {{"vehicle_id", opts_.vehicle_id},
            {"applied_revision", applied_revision_.load()},
            {"connected", connected_.load()},
            {"processes", procs},
            {"hosts", hosts},
            {"relay", {{"backlog", relay_.size()}, {"dropped", relay_.dropped()}, {"forwarded", relay_.forwarded()}}}};
}

void Orchestrator::handle_desired(ControlChannel* ch, const DesiredState& desired, bool from_cache) {
    if (desired.vehicle_id != opts_.vehicle_id && !desired.vehicle_id.empty()) {
        relay_.push(orchestrator_log(LogLevel::warn, "ignored desired state for vehicle " + desired.vehicle_id));
        return;
    }
    if (applied_any_ && desired.revision < applied_revision_.load()) {
        relay_.push(orchestrator_log(LogLevel::warn, "ignored stale revision " + std::to_string(desired.revision) +
                                                          " (applied " + std::to_string(applied_revision_.load()) +
                                                          ")"));
        return;
    }
    PackageFetcher fetch;
    if (ch) fetch = [this, ch](const std::string& checksum) { return fetch_package(*ch, checksum); };
    try {
        supervisor_->apply(desired, fetch);
    } catch (const std::exception& e) {
        relay_.push(orchestrator_log(LogLevel::error, std::string("apply failed: ") + e.what()));
        return;
    }
    applied_revision_ = desired.revision;
    applied_any_ = true;
    if (from_cache) return;
    try {
        write_file_atomic(cache_path(), to_json(desired).dump(2));
    } catch (const std::exception& e) {
        relay_.push(orchestrator_log(LogLevel::warn, std::string("cache write failed: ") + e.what()));
    }
    if (ch) ch->send({ControlType::ack, ch->next_id(), {{"ok", true}, {"revision", desired.revision}}});
}

Bytes Orchestrator::fetch_package(ControlChannel& ch, const std::string& checksum) {
    const auto id = ch.next_id();
    ch.send({ControlType::get_package, id, {{"checksum", checksum}}});
    const auto deadline = Clock::now() + Millis(30000);
    while (Clock::now() < deadline && !stopping_.load()) {
        auto msg = ch.recv_for(Millis(200));
        if (!msg) continue;
        if (msg->type == ControlType::ack && msg->id == id) {
            if (!msg->payload.value("ok", false))
                throw Error(Errc::unknown_package, msg->payload.value("message", checksum));
            return base64_decode(msg->payload.at("blob").get<std::string>());
        }
        deferred_.push_back(std::move(*msg));
    }
    throw Error(Errc::timeout, "no reply for package " + checksum);
}

bool Orchestrator::session(ControlChannel& ch) {
    ch.send({ControlType::hello,
             ch.next_id(),
             {{"vehicle_id", opts_.vehicle_id}, {"token", opts_.token}, {"applied_revision", applied_revision_.load()}}});
    auto reply = ch.recv_for(Millis(5000));
    if (!reply) throw Error(Errc::timeout, "no hello reply from registry");
    if (!reply->payload.value("ok", false)) {
        if (reply->payload.value("error", std::string()) == errc_name(Errc::auth_failed)) {
            auth_rejected_ = true;
            cv_.notify_all();
            return false;
        }
        throw Error(Errc::malformed, "registry refused hello: " + reply->payload.dump());
    }
    connected_ = true;
    auto next_status = Clock::now();
    auto next_heartbeat = Clock::now() + opts_.heartbeat_interval;

    auto dispatch = [&](const ControlEnvelope& msg) {
        switch (msg.type) {
        case ControlType::desired_state:
            handle_desired(&ch, desired_state_from_json(msg.payload), false);
            break;
        case ControlType::ack:
            if (auto it = inflight_.find(msg.id); it != inflight_.end()) {
                relay_.mark_forwarded(it->second.size());
                inflight_.erase(it);
            }
            break;
        default:
            break;
        }
    };

    while (!stopping_.load()) {
        while (!deferred_.empty()) {
            const ControlEnvelope msg = std::move(deferred_.front());
            deferred_.pop_front();
            dispatch(msg);
        }
        if (ch.socket().readable(Millis(20))) {
            auto msg = ch.recv();
            if (!msg) return true;
            dispatch(*msg);
        }
        for (auto batch = relay_.take_batch(); !batch.empty(); batch = relay_.take_batch()) {
            const auto id = ch.next_id();
            json records = json::array();
            for (const auto& r : batch) records.push_back(r);
            inflight_[id] = std::move(batch);
            ch.send({ControlType::log, id, {{"records", std::move(records)}}});
        }
        const auto now = Clock::now();
        if (now >= next_status) {
            ch.send({ControlType::status, ch.next_id(), status_json()});
            next_status = now + opts_.status_interval;
        }
        if (now >= next_heartbeat) {
            ch.send({ControlType::heartbeat, ch.next_id(), json::object()});
            next_heartbeat = now + opts_.heartbeat_interval;
        }
    }
    // Best-effort flush on shutdown.
    if (auto batch = relay_.take_batch(true); !batch.empty()) {
        json records(batch);
        ch.send({ControlType::log, ch.next_id(), {{"records", std::move(records)}}});
    }
    return true;
}

void Orchestrator::upstream_loop() {
    auto apply_cache = [&] {
        if (applied_any_ || !fs::exists(cache_path())) return;
        try {
            const Bytes raw = read_file(cache_path());
            const auto cached = desired_state_from_json(json::parse(raw.begin(), raw.end()));
            handle_desired(nullptr, cached.autostart_only(), true);
            relay_.push(orchestrator_log(LogLevel::info, "applied cached autostart set of revision " +
                                                             std::to_string(cached.revision)));
        } catch (const std::exception& e) {
            relay_.push(orchestrator_log(LogLevel::error, std::string("cannot read cached state: ") + e.what()));
        }
    };

    if (!opts_.registry) {
        apply_cache();
        return;
    }
    Millis backoff = opts_.reconnect_initial;
    while (!stopping_.load()) {
        try {
            ControlChannel ch = ControlChannel::connect(*opts_.registry);
            session(ch);
            backoff = opts_.reconnect_initial;
        } catch (const std::exception& e) {
            if (connected_.load())
                relay_.push(orchestrator_log(LogLevel::warn, std::string("registry connection lost: ") + e.what()));
        }
        connected_ = false;
        // Unacknowledged batches go back in front, oldest first.
        for (auto it = inflight_.rbegin(); it != inflight_.rend(); ++it) relay_.restore(std::move(it->second));
        inflight_.clear();
        deferred_.clear();
        if (auth_rejected_.load()) return;
        apply_cache();
        sleep_for(backoff);
        backoff = std::min(opts_.reconnect_cap, backoff * 2);
    }
}

void Orchestrator::host_accept_loop() {
    while (!stopping_.load()) {
        Socket s = host_listener_.accept(Millis(100));
        if (!s.valid()) continue;
        auto ch = std::make_shared<ControlChannel>(std::move(s));
        std::lock_guard lk(mu_);
        if (stopping_.load()) break;
        host_channels_.push_back(ch);
        host_threads_.emplace_back([this, ch] {
            try {
                serve_host(ch);
            } catch (const std::exception&) {
                // A misbehaving host only loses its own channel.
            }
            ch->close();
        });
    }
}

void Orchestrator::serve_host(std::shared_ptr<ControlChannel> ch) {
    auto hello = ch->recv_for(Millis(5000));
    if (!hello || hello->type != ControlType::hello) return;
    const std::string function = hello->payload.value("function", std::string());
    while (!stopping_.load()) {
        if (!ch->socket().readable(Millis(100))) continue;
        auto msg = ch->recv();
        if (!msg) return;
        if (msg->type == ControlType::log) {
            const json records = msg->payload.value("records", json::array());
            for (const auto& r : records) {
                json rec = r;
                if (!rec.contains("function")) rec["function"] = function;
                relay_.push(std::move(rec));
            }
        } else if (msg->type == ControlType::status) {
            auto status = HostStatus::from_json(msg->payload);
            std::lock_guard lk(mu_);
            host_status_[function] = std::move(status);
        }
    }
}

} // namespace edgefn
