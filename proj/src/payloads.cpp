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

#include "edgefn/payloads.hpp"

#include <cstring>

#include "edgefn/error.hpp"

namespace edgefn {

using json = nlohmann::json;

Bytes encode_imu(const ImuSample& s) {
    Bytes out;
    out.reserve(kImuSampleSize);
    ByteWriter w(out);
    w.put<std::int64_t>(s.ts);
    for (double v : s.accel) w.put<double>(v);
    for (double v : s.gyro) w.put<double>(v);
    return out;
}

ImuSample decode_imu(ByteView data) {
    if (data.size() != kImuSampleSize)
        throw Error(Errc::malformed, "imu sample must be 56 bytes, got " + std::to_string(data.size()));
    ByteReader r(data);
    ImuSample s;
    s.ts = r.get<std::int64_t>();
    for (double& v : s.accel) v = r.get<double>();
    for (double& v : s.gyro) v = r.get<double>();
    return s;
}

Bytes encode_image(std::uint32_t height, std::uint32_t width, std::uint32_t channels, ByteView pixels) {
    if (std::size_t(height) * width * channels != pixels.size())
        throw Error(Errc::invalid_argument, "pixel buffer does not match image geometry");
    Bytes out;
    out.reserve(kImageHeaderSize + pixels.size());
    ByteWriter w(out);
    w.put_string("EFIM");
    w.put<std::uint32_t>(height);
    w.put<std::uint32_t>(width);
    w.put<std::uint32_t>(channels);
    w.put_bytes(pixels);
    return out;
}

ImageView decode_image(ByteView data) {
    ByteReader r(data);
    if (r.get_string(4) != "EFIM") throw Error(Errc::malformed, "image frame magic mismatch");
    ImageView v;
    v.height = r.get<std::uint32_t>();
    v.width = r.get<std::uint32_t>();
    v.channels = r.get<std::uint32_t>();
    const std::size_t n = std::size_t(v.height) * v.width * v.channels;
    if (r.remaining() != n) throw Error(Errc::malformed, "image pixel count does not match header");
    v.pixels = r.get_bytes(n);
    return v;
}

Bytes encode_mock_detections(const std::vector<Detection>& boxes) {
    Bytes out;
    out.reserve(kMockHeaderSize + kMockRecordSize * boxes.size());
    ByteWriter w(out);
    w.put_string("MDET");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(boxes.size()));
    for (const auto& b : boxes) {
        w.put<float>(b.x1);
        w.put<float>(b.y1);
        w.put<float>(b.x2);
        w.put<float>(b.y2);
        w.put<std::uint32_t>(b.class_id);
        w.put<float>(b.confidence);
    }
    return out;
}

std::vector<Detection> decode_mock_detections(ByteView data) {
    if (data.size() < kMockHeaderSize || std::memcmp(data.data(), "MDET", 4) != 0) return {};
    ByteReader r(data);
    r.get_bytes(4);
    const auto count = r.get<std::uint32_t>();
    if (r.remaining() / kMockRecordSize < count)
        throw Error(Errc::malformed, "mock detection block truncated");
    std::vector<Detection> out(count);
    for (auto& d : out) {
        d.x1 = r.get<float>();
        d.y1 = r.get<float>();
        d.x2 = r.get<float>();
        d.y2 = r.get<float>();
        d.class_id = r.get<std::uint32_t>();
        d.confidence = r.get<float>();
    }
    return out;
}

std::string_view action_name(ActionKind a) noexcept {
    switch (a) {
    case ActionKind::start_recording: return "start_recording";
    case ActionKind::stop_recording: return "stop_recording";
    case ActionKind::mark: return "mark";
    }
    return "mark";
}

ActionKind action_from_name(std::string_view name) {
    if (name == "start_recording") return ActionKind::start_recording;
    if (name == "stop_recording") return ActionKind::stop_recording;
    if (name == "mark") return ActionKind::mark;
    throw Error(Errc::invalid_argument, "unknown action '" + std::string(name) + "'");
}

std::string_view log_level_name(LogLevel l) noexcept {
    switch (l) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
    }
    return "info";
}

LogLevel log_level_from_name(std::string_view name) {
    if (name == "debug") return LogLevel::debug;
    if (name == "info") return LogLevel::info;
    if (name == "warn") return LogLevel::warn;
    if (name == "error") return LogLevel::error;
    throw Error(Errc::invalid_argument, "unknown log level '" + std::string(name) + "'");
}

std::string cap_log_message(std::string message) {
    if (message.size() <= kLogMessageCap) return message;
    message.resize(kLogMessageCap - kTruncationMarker.size());
    message += kTruncationMarker;
    return message;
}

json to_json(const TriggerAction& a) {
    json j = {{"action", action_name(a.action)},
              {"label", a.label},
              {"decision_ts", a.decision_ts},
              {"function", a.function}};
    j["cause_seq"] = a.cause_seq ? json(*a.cause_seq) : json(nullptr);
    return j;
}

TriggerAction trigger_action_from_json(const json& j) {
    TriggerAction a;
    a.action = action_from_name(j.at("action").get<std::string>());
    a.label = j.value("label", "");
    a.decision_ts = j.at("decision_ts").get<Nanos>();
    a.function = j.value("function", "");
    if (j.contains("cause_seq") && !j["cause_seq"].is_null()) a.cause_seq = j["cause_seq"].get<std::uint64_t>();
    return a;
}

json to_json(const RttRecord& r) {
    return {{"function", r.function}, {"cause_seq", r.cause_seq}, {"t_in", r.t_in}, {"t_out", r.t_out}};
}

RttRecord rtt_record_from_json(const json& j) {
    return RttRecord{j.at("function").get<std::string>(), j.at("cause_seq").get<std::uint64_t>(),
                     j.at("t_in").get<Nanos>(), j.at("t_out").get<Nanos>()};
}

json to_json(const LogRecord& r) {
    return {{"level", log_level_name(r.level)}, {"ts", r.ts}, {"function", r.function}, {"message", r.message}};
}

LogRecord log_record_from_json(const json& j) {
    LogRecord r;
    r.level = log_level_from_name(j.at("level").get<std::string>());
    r.ts = j.at("ts").get<Nanos>();
    r.function = j.at("function").get<std::string>();
    r.message = j.at("message").get<std::string>();
    return r;
}

Bytes json_bytes(const json& j) {
    const std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

json parse_json_bytes(ByteView data) {
    try {
        return json::parse(data.begin(), data.end());
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, e.what());
    }
}

} // namespace edgefn
