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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/bytes.hpp"
#include "edgefn/clock.hpp"

namespace edgefn {

// --- Sensor payloads -------------------------------------------------------

// Vehicle frame: x longitudinal (forward positive), z vertical.
struct ImuSample {
    Nanos ts = 0;
    std::array<double, 3> accel{};
    std::array<double, 3> gyro{};
};

// i64 ts | 3 x f64 accel | 3 x f64 gyro, little-endian.
inline constexpr std::size_t kImuSampleSize = 56;
Bytes encode_imu(const ImuSample& s);
ImuSample decode_imu(ByteView data);

// image_frame payload: "EFIM" | u32 height | u32 width | u32 channels | pixels (row-major u8).
inline constexpr std::size_t kImageHeaderSize = 16;

struct ImageView {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    ByteView pixels;
};

Bytes encode_image(std::uint32_t height, std::uint32_t width, std::uint32_t channels, ByteView pixels);
ImageView decode_image(ByteView data);

struct Detection {
    float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    std::uint32_t class_id = 0;
    float confidence = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

// Mock-detector box block, placed at the start of an image's pixel data:
// "MDET" | u32 count | count x {f32 x1,y1,x2,y2 | u32 class | f32 confidence}.
inline constexpr std::size_t kMockHeaderSize = 8;
inline constexpr std::size_t kMockRecordSize = 24;
Bytes encode_mock_detections(const std::vector<Detection>& boxes);
// Empty when the data does not start with the mock magic.
std::vector<Detection> decode_mock_detections(ByteView data);

// --- Framework messages ----------------------------------------------------

enum class ActionKind { start_recording, stop_recording, mark };
std::string_view action_name(ActionKind a) noexcept;
ActionKind action_from_name(std::string_view name);

struct TriggerAction {
    ActionKind action = ActionKind::mark;
    std::string label;
    Nanos decision_ts = 0;
    std::string function;
    std::optional<std::uint64_t> cause_seq;
};

struct RttRecord {
    std::string function;
    std::uint64_t cause_seq = 0;
    Nanos t_in = 0;
    Nanos t_out = 0;

    double rtt_ms() const noexcept { return to_millis(t_out - t_in); }
};

enum class LogLevel { debug, info, warn, error };
std::string_view log_level_name(LogLevel l) noexcept;
LogLevel log_level_from_name(std::string_view name);

inline constexpr std::size_t kLogMessageCap = 4096;
inline constexpr std::string_view kTruncationMarker = "...[truncated]";

struct LogRecord {
    LogLevel level = LogLevel::info;
    Nanos ts = 0;
    std::string function;
    std::string message;
};

// Caps a message at kLogMessageCap bytes including the truncation marker.
std::string cap_log_message(std::string message);

nlohmann::json to_json(const TriggerAction& a);
TriggerAction trigger_action_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RttRecord& r);
RttRecord rtt_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LogRecord& r);
LogRecord log_record_from_json(const nlohmann::json& j);

Bytes json_bytes(const nlohmann::json& j);
nlohmann::json parse_json_bytes(ByteView data);

} // namespace edgefn
