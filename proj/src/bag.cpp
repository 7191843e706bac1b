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

#include "edgefn/bag.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

#include "edgefn/error.hpp"

namespace edgefn {

namespace {

constexpr char kMagic[4] = {'J', 'B', 'L', 'B'};

} // namespace

std::uint32_t Bag::topic_index(const std::string& name, ContentType type, nlohmann::json metadata) {
    for (std::size_t i = 0; i < topics.size(); ++i)
        if (topics[i].name == name) return static_cast<std::uint32_t>(i);
    topics.push_back({name, type, std::move(metadata)});
    return static_cast<std::uint32_t>(topics.size() - 1);
}

std::size_t Bag::count(std::uint32_t topic) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const BagRecord& r) { return r.topic == topic; }));
}

void Bag::validate() const {
    std::uint64_t last = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].topic >= topics.size())
            throw Error(Errc::malformed, "record " + std::to_string(i) + " has topic index out of range");
        if (records[i].timestamp_ns < last)
            throw Error(Errc::malformed, "record " + std::to_string(i) + " goes back in time");
        last = records[i].timestamp_ns;
    }
}

Bytes encode_bag(const Bag& bag) {
    bag.validate();
    Bytes out;
    ByteWriter w(out);
    w.put_bytes(ByteView(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.put<std::uint16_t>(kBagVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(bag.topics.size()));
    for (const auto& t : bag.topics) {
        const std::string meta = t.metadata.dump();
        if (t.name.size() > std::numeric_limits<std::uint16_t>::max() ||
            meta.size() > std::numeric_limits<std::uint16_t>::max())
            throw Error(Errc::invalid_argument, "topic name or metadata too long: " + t.name);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
        w.put_string(t.name);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(t.content_type));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(meta.size()));
        w.put_string(meta);
    }
    for (const auto& r : bag.records) {
        w.put<std::uint32_t>(r.topic);
        w.put<std::uint64_t>(r.timestamp_ns);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(r.payload.size()));
        w.put_bytes(r.payload);
    }
    return out;
}

Bag decode_bag(ByteView data) {
    ByteReader r(data);
    const auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kMagic)))
        throw Error(Errc::malformed, "bad bag magic at offset 0");
    const std::size_t version_at = r.offset();
    if (const auto version = r.get<std::uint16_t>(); version != kBagVersion)
        throw Error(Errc::malformed, "unsupported bag version " + std::to_string(version) + " at offset " +
                                         std::to_string(version_at));
    Bag bag;
    const auto topic_count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < topic_count; ++i) {
        BagTopic t;
        t.name = r.get_string(r.get<std::uint16_t>());
        const std::size_t type_at = r.offset();
        const auto type = r.get<std::uint8_t>();
        if (type > static_cast<std::uint8_t>(ContentType::log_record))
            throw Error(Errc::malformed, "unknown content type at offset " + std::to_string(type_at));
        t.content_type = static_cast<ContentType>(type);
        const auto meta_len = r.get<std::uint16_t>();
        const std::size_t meta_at = r.offset();
        const std::string meta = r.get_string(meta_len);
        t.metadata = nlohmann::json::parse(meta, nullptr, false);
        if (t.metadata.is_discarded())
            throw Error(Errc::malformed, "bad topic metadata at offset " + std::to_string(meta_at));
        bag.topics.push_back(std::move(t));
    }
    std::uint64_t last = 0;
    while (!r.done()) {
        const std::size_t record_at = r.offset();
        BagRecord rec;
        rec.topic = r.get<std::uint32_t>();
        if (rec.topic >= topic_count)
            throw Error(Errc::malformed, "topic index out of range at offset " + std::to_string(record_at));
        const std::size_t ts_at = r.offset();
        rec.timestamp_ns = r.get<std::uint64_t>();
        if (rec.timestamp_ns < last)
            throw Error(Errc::malformed, "timestamp goes backwards at offset " + std::to_string(ts_at));
        last = rec.timestamp_ns;
        const auto len = r.get<std::uint32_t>();
        const auto payload = r.get_bytes(len);
        rec.payload.assign(payload.begin(), payload.end());
        bag.records.push_back(std::move(rec));
    }
    return bag;
}

void write_bag(const std::filesystem::path& path, const Bag& bag) {
    const Bytes data = encode_bag(bag);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(Errc::io_failure, "write failed: " + path.string());
}

Bag read_bag(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(Errc::io_failure, "read failed: " + path.string());
    return decode_bag(data);
}

Bag import_jsonl(const std::filesystem::path& index) {
    std::ifstream in(index);
    if (!in) throw Error(Errc::io_failure, "cannot open " + index.string());
    struct Entry {
        std::uint64_t ts;
        std::size_t line;
        std::uint32_t topic;
        Bytes payload;
    };
    Bag bag;
    std::vector<Entry> entries;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw Error(Errc::malformed, index.string() + ":" + std::to_string(n) + ": not a JSON object");
        try {
            std::filesystem::path file = j.at("file").get<std::string>();
            if (file.is_relative()) file = index.parent_path() / file;
            std::ifstream pf(file, std::ios::binary);
            if (!pf) throw Error(Errc::io_failure, "cannot open payload " + file.string());
            Bytes payload((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
            const auto topic = bag.topic_index(j.at("topic").get<std::string>(),
                                               content_type_from_name(j.at("content_type").get<std::string>()),
                                               j.value("metadata", nlohmann::json::object()));
            entries.push_back({j.at("timestamp_ns").get<std::uint64_t>(), n, topic, std::move(payload)});
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::malformed, index.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.ts < b.ts; });
    for (auto& e : entries) bag.records.push_back({e.topic, e.ts, std::move(e.payload)});
    return bag;
}

} // namespace edgefn
