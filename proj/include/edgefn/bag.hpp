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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/bytes.hpp"
#include "edgefn/clock.hpp"
#include "edgefn/transport.hpp"

namespace edgefn {

// Replay bag layout (all integers little-endian):
//   "JBLB" | u16 version
//   u32 topic count, then per topic:
//     u16 name length | name | u8 content type | u16 metadata length | metadata JSON
//   records until end of file:
//     u32 topic index | u64 timestamp ns | u32 payload length | payload
inline constexpr std::uint16_t kBagVersion = 1;

struct BagTopic {
    std::string name;
    ContentType content_type = ContentType::raw_bytes;
    nlohmann::json metadata = nlohmann::json::object();
};

struct BagRecord {
    std::uint32_t topic = 0;
    std::uint64_t timestamp_ns = 0;
    Bytes payload;
};

struct Bag {
    std::vector<BagTopic> topics;
    std::vector<BagRecord> records;

    // Index of `name`, adding the topic when absent.
    std::uint32_t topic_index(const std::string& name, ContentType type,
                              nlohmann::json metadata = nlohmann::json::object());
    std::size_t count(std::uint32_t topic) const;
    // Throws malformed when a topic index is out of range or timestamps go backwards.
    void validate() const;
};

Bytes encode_bag(const Bag& bag);
// Throws Errc::malformed naming the offset of the first bad byte.
Bag decode_bag(ByteView data);

void write_bag(const std::filesystem::path& path, const Bag& bag);
Bag read_bag(const std::filesystem::path& path);

// Builds a bag from a JSON-lines index. Each line is
//   {"topic": "/sensors/imu", "content_type": "imu_sample", "timestamp_ns": 123,
//    "file": "relative/or/absolute/payload.bin", "metadata": {...}}
// where "metadata" is optional and only read on a topic's first line. Lines
// are sorted by timestamp before encoding.
Bag import_jsonl(const std::filesystem::path& index);

} // namespace edgefn
