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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/control.hpp"
#include "edgefn/deploy.hpp"
#include "edgefn/payloads.hpp"
#include "edgefn/socket.hpp"

namespace edgefn {

// Static shared secrets, kept only as SHA-256 hex digests. File layout:
// {"users": {"<name>": "<sha256 hex>"}, "vehicles": {"<vehicle id>": "<sha256 hex>"}}
struct Tokens {
    std::map<std::string, std::string> users;
    std::map<std::string, std::string> vehicles;

    static Tokens load(const std::filesystem::path& path);
    static Tokens from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    bool user_ok(std::string_view token) const;
    bool vehicle_ok(std::string_view vehicle_id, std::string_view token) const;
};

struct PackageInfo {
    std::string name;
    std::string version;
    std::string checksum;
    PackageKind kind = PackageKind::native_ref;
    FunctionManifest manifest;
    std::uint64_t size = 0;
};

nlohmann::json to_json(const PackageInfo& p);

struct PackageUpload {
    std::string name;
    std::string version;
    PackageKind kind = PackageKind::native_ref;
    // Manifest template; its name must equal the package name.
    nlohmann::json manifest;
    // Guest archive bytes. Empty for native packages, whose blob is then the
    // canonical manifest JSON.
    Bytes blob;
    // When given, must equal the SHA-256 of the blob.
    std::optional<std::string> checksum;
};

struct DeployItem {
    std::string name;
    std::string version;
    Params params;
    std::optional<bool> autostart;
};

struct LogQuery {
    std::string vehicle;
    std::optional<std::string> function;
    std::optional<LogLevel> level;
    // Inclusive bounds on the record timestamp.
    std::optional<Nanos> from;
    std::optional<Nanos> to;
};

struct IngestResult {
    std::size_t accepted = 0;
    std::vector<std::string> errors;
};

struct VehicleInfo {
    std::string id;
    std::uint64_t revision = 0;
    std::uint64_t applied_revision = 0;
    bool connected = false;
    std::int64_t last_seen_ms = 0;  // Unix epoch, 0 when never seen
    nlohmann::json last_status = nlohmann::json::object();
};

// Durable registry state under one directory:
//   packages/<checksum>/blob, packages/<checksum>/meta.json
//   vehicles/<id>/state.json, vehicles/<id>/logs/<yyyy-mm-dd>.jsonl
// Every acknowledged mutation is on disk before the call returns.
class RegistryStore {
public:
    RegistryStore(std::filesystem::path data_dir, Tokens tokens);

    // Throws Errc::auth_failed.
    void authorize_user(std::string_view token) const;
    bool authenticate_vehicle(std::string_view vehicle_id, std::string_view token) const;

    // Idempotent for identical content. Throws checksum_mismatch,
    // version_conflict or invalid_manifest.
    PackageInfo put_package(const PackageUpload& upload);
    // Replaces the vehicle's function set and bumps its revision. Throws
    // unknown_vehicle or unknown_package, leaving the revision unchanged.
    DesiredState set_deployment(const std::string& vehicle_id, const std::vector<DeployItem>& items);
    DesiredState desired_state(const std::string& vehicle_id) const;

    // Accepts every well-formed record in `records` (a JSON array of log
    // records) and reports the rest.
    IngestResult ingest_logs(const std::string& vehicle_id, const nlohmann::json& records);
    // Matching records ordered by timestamp.
    std::vector<nlohmann::json> query_logs(const LogQuery& query) const;

    std::vector<PackageInfo> packages() const;
    std::vector<VehicleInfo> vehicles() const;
    Bytes package_blob(const std::string& checksum) const;

    void record_ack(const std::string& vehicle_id, std::uint64_t revision);
    void record_status(const std::string& vehicle_id, const nlohmann::json& status);
    void set_connected(const std::string& vehicle_id, bool connected);

    // Called after each successful set_deployment, outside the store lock.
    void on_deploy(std::function<void(const DesiredState&)> callback);

    const std::filesystem::path& data_dir() const noexcept { return dir_; }
    // Number of ingest_logs calls that stored at least one record.
    std::uint64_t log_batches() const noexcept { return log_batches_.load(); }

private:
    struct VehicleState {
        DesiredState desired;
        std::uint64_t applied_revision = 0;
        std::int64_t last_seen_ms = 0;
        nlohmann::json last_status = nlohmann::json::object();
        bool connected = false;
    };

    void load();
    void persist_vehicle(const std::string& id, const VehicleState& st) const;
    VehicleState& vehicle(const std::string& id);
    std::filesystem::path vehicle_dir(const std::string& id) const;

    std::filesystem::path dir_;
    Tokens tokens_;
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, PackageInfo> packages_;
    std::map<std::string, VehicleState> vehicles_;
    std::mutex log_mu_;
    std::function<void(const DesiredState&)> on_deploy_;
    std::atomic<std::uint64_t> log_batches_{0};
};

// Serves a RegistryStore: the vehicle listener speaks the control channel
// (hello, desired_state, ack, log, status, heartbeat, get_package) and the
// operator listener answers put_package, set_deployment, query_logs and list.
class RegistryServer {
public:
    RegistryServer(std::shared_ptr<RegistryStore> store, const Endpoint& vehicles, const Endpoint& ops);
    ~RegistryServer();
    RegistryServer(const RegistryServer&) = delete;
    RegistryServer& operator=(const RegistryServer&) = delete;

    void stop();
    const Endpoint& vehicle_endpoint() const noexcept { return vehicle_ep_; }
    const Endpoint& ops_endpoint() const noexcept { return ops_ep_; }
    std::size_t connected_vehicles() const;

private:
    void accept_loop(Socket& listener, bool vehicle_side);
    void serve_vehicle(std::shared_ptr<ControlChannel> ch);
    void serve_ops(std::shared_ptr<ControlChannel> ch);
    nlohmann::json handle_ops(const ControlEnvelope& req);
    void push(const DesiredState& state);

    std::shared_ptr<RegistryStore> store_;
    Endpoint vehicle_ep_;
    Endpoint ops_ep_;
    Socket vehicle_listener_;
    Socket ops_listener_;
    std::atomic<bool> stopping_{false};

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<ControlChannel>> vehicle_channels_;
    std::vector<std::shared_ptr<ControlChannel>> open_;
    std::vector<std::thread> workers_;
    std::thread vehicle_acceptor_;
    std::thread ops_acceptor_;
};

// Operator-side helper: sends one request and returns the ack payload,
// throwing Error with the remote error code when "ok" is false.
nlohmann::json ops_call(const Endpoint& ops, ControlType type, nlohmann::json payload,
                        std::chrono::milliseconds timeout = std::chrono::seconds(10));

} // namespace edgefn
