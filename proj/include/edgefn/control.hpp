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
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "edgefn/socket.hpp"

namespace edgefn {

// Control-plane messages: u32 LE length-prefixed UTF-8 JSON objects
// {"type": <type>, "id": <u64>, "payload": <object>} on a stream socket.
// The vehicle channel uses hello/desired_state/ack/log/status/heartbeat; the
// operator listener adds put_package/set_deployment/query_logs/list requests,
// each answered by an ack whose payload carries "ok" and either a result or
// "error"/"message". Vehicles fetch package blobs they have not staged yet
// with get_package.
enum class ControlType {
    hello,
    desired_state,
    ack,
    log,
    status,
    heartbeat,
    put_package,
    set_deployment,
    query_logs,
    list,
    get_package,
};

std::string_view control_type_name(ControlType t) noexcept;
ControlType control_type_from_name(std::string_view name);

struct ControlEnvelope {
    ControlType type = ControlType::heartbeat;
    std::uint64_t id = 0;
    nlohmann::json payload = nlohmann::json::object();
};

Bytes encode_control(const ControlEnvelope& env);
ControlEnvelope decode_control(ByteView body);

inline constexpr std::size_t kMaxControlMessage = 256u << 20;

// Thread-safe sender / single-reader framed channel over one socket.
class ControlChannel {
public:
    ControlChannel() = default;
    explicit ControlChannel(Socket sock) : sock_(std::move(sock)) {}

    static ControlChannel connect(const Endpoint& ep) { return ControlChannel(Socket::connect(ep)); }

    void send(const ControlEnvelope& env);
    // nullopt on orderly close.
    std::optional<ControlEnvelope> recv();
    // nullopt on timeout or close.
    std::optional<ControlEnvelope> recv_for(std::chrono::milliseconds timeout);

    std::uint64_t next_id() noexcept { return ++ids_; }
    void close() noexcept { sock_.shutdown_both(); }
    bool valid() const noexcept { return sock_.valid(); }
    Socket& socket() noexcept { return sock_; }

private:
    Socket sock_;
    std::mutex write_mu_;
    std::atomic<std::uint64_t> ids_{0};
};

// One-shot request/response exchange against an operator endpoint.
ControlEnvelope control_request(const Endpoint& ep, ControlType type, nlohmann::json payload,
                                std::chrono::milliseconds timeout = std::chrono::seconds(10));

// Builds an error ack payload {"ok": false, "error": <errc name>, "message": ...}.
nlohmann::json error_payload(std::string_view code, std::string_view message);

} // namespace edgefn
