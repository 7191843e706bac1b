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

#include "edgefn/control.hpp"

#include <array>

#include "edgefn/error.hpp"

namespace edgefn {

using json = nlohmann::json;

namespace {
constexpr std::array<std::string_view, 11> kTypeNames = {
    "hello", "desired_state", "ack", "log", "status", "heartbeat",
    "put_package", "set_deployment", "query_logs", "list", "get_package"};
}

std::string_view control_type_name(ControlType t) noexcept {
    return kTypeNames[static_cast<std::size_t>(t)];
}

ControlType control_type_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kTypeNames.size(); ++i)
        if (kTypeNames[i] == name) return static_cast<ControlType>(i);
    throw Error(Errc::malformed, "unknown control message type '" + std::string(name) + "'");
}

Bytes encode_control(const ControlEnvelope& env) {
    json j = {{"type", control_type_name(env.type)}, {"id", env.id}, {"payload", env.payload}};
    const std::string text = j.dump();
    return Bytes(text.begin(), text.end());
}

ControlEnvelope decode_control(ByteView body) {
    try {
        json j = json::parse(body.begin(), body.end());
        ControlEnvelope env;
        env.type = control_type_from_name(j.at("type").get<std::string>());
        env.id = j.value("id", std::uint64_t{0});
        env.payload = j.value("payload", json::object());
        return env;
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, std::string("control message: ") + e.what());
    }
}

void ControlChannel::send(const ControlEnvelope& env) {
    const Bytes body = encode_control(env);
    std::lock_guard lk(write_mu_);
    sock_.send_frame(body);
}

std::optional<ControlEnvelope> ControlChannel::recv() {
    auto body = sock_.recv_frame(kMaxControlMessage);
    if (!body) return std::nullopt;
    return decode_control(*body);
}

std::optional<ControlEnvelope> ControlChannel::recv_for(std::chrono::milliseconds timeout) {
    if (!sock_.readable(timeout)) return std::nullopt;
    return recv();
}

ControlEnvelope control_request(const Endpoint& ep, ControlType type, json payload,
                                std::chrono::milliseconds timeout) {
    ControlChannel ch = ControlChannel::connect(ep);
    ch.send(ControlEnvelope{type, ch.next_id(), std::move(payload)});
    auto reply = ch.recv_for(timeout);
    if (!reply) throw Error(Errc::timeout, "no reply from " + ep.str());
    return *reply;
}

json error_payload(std::string_view code, std::string_view message) {
    return {{"ok", false}, {"error", code}, {"message", message}};
}

} // namespace edgefn
