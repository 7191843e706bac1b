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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/context.hpp"
#include "edgefn/ingress.hpp"
#include "edgefn/transport.hpp"

namespace edgefn {

struct SubscriptionSpec {
    std::string topic;
    ChannelClass cls = ChannelClass::low_volume;
    std::size_t depth_or_slots = IngressDefaults::low_volume_depth;
    QosProfile qos;
    std::size_t slot_size = IngressDefaults::slot_size;
};

enum class ScheduleMode { periodic, event };

struct FunctionManifest {
    std::string name;
    std::string version = "0.0.0";
    ScheduleMode mode = ScheduleMode::event;
    std::uint32_t period_ms = 0;
    std::string trigger_topic;
    std::vector<SubscriptionSpec> subscriptions;
    Params params;
    bool autostart = false;
    enum class EntryKind { native, guest } entry_kind = EntryKind::native;
    // Builtin id for native entries, package reference for guest entries.
    std::string entry_ref;

    // Throws Errc::invalid_manifest on the first violated invariant.
    void validate() const;
};

// JSON layout:
// {
//   "name": "imu_fft", "version": "1.0.0",
//   "mode": {"type": "event", "trigger_topic": "/sensors/imu"}
//         | {"type": "periodic", "period_ms": 50},
//   "subscriptions": [{"topic": ..., "class": "low_volume"|"high_volume",
//                      "depth_or_slots": 256, "slot_size": 8388608,
//                      "qos": {"history_depth": 10, "reliability": "reliable",
//                              "durability": "volatile"}}],
//   "params": {"key": "value"}, "autostart": true,
//   "entry": {"type": "native", "builtin": "imu_fft"}
//          | {"type": "guest", "package": "<ref>"}
// }
FunctionManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FunctionManifest& m);
FunctionManifest load_manifest(const std::filesystem::path& path);

nlohmann::json to_json(const QosProfile& q);
QosProfile qos_from_json(const nlohmann::json& j);

} // namespace edgefn
