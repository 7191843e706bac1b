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

#include "edgefn/manifest.hpp"

#include <fstream>
#include <set>

#include "edgefn/error.hpp"

namespace edgefn {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::invalid_manifest, what); }

bool valid_identifier(std::string_view s) {
    if (s.empty() || s.size() > 128) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

} // namespace

void FunctionManifest::validate() const {
    if (!valid_identifier(name)) invalid("name must match [A-Za-z0-9_.-]{1,128}, got '" + name + "'");
    if (mode == ScheduleMode::periodic && period_ms < 1) invalid("periodic period must be >= 1 ms");
    std::set<std::string_view> topics;
    for (const auto& s : subscriptions) {
        if (s.topic.empty()) invalid("subscription topic must be non-empty");
        if (!topics.insert(s.topic).second) invalid("topic '" + s.topic + "' subscribed twice");
        if (s.depth_or_slots < 1) invalid("depth_or_slots must be >= 1 for '" + s.topic + "'");
        if (s.cls == ChannelClass::high_volume && s.slot_size < 1) invalid("slot_size must be positive");
        try {
            s.qos.validate();
        } catch (const Error& e) {
            invalid(e.what());
        }
    }
    if (mode == ScheduleMode::event && !topics.count(trigger_topic))
        invalid("trigger topic '" + trigger_topic + "' is not among the subscriptions");
    if (entry_ref.empty()) invalid("entry reference is empty");
}

json to_json(const QosProfile& q) {
    return {{"history_depth", q.history_depth},
            {"reliability", q.reliability == Reliability::reliable ? "reliable" : "best_effort"},
            {"durability", "volatile"}};
}

QosProfile qos_from_json(const json& j) {
    QosProfile q;
    q.history_depth = j.value("history_depth", q.history_depth);
    const auto rel = j.value("reliability", std::string("reliable"));
    if (rel == "reliable")
        q.reliability = Reliability::reliable;
    else if (rel == "best_effort")
        q.reliability = Reliability::best_effort;
    else
        invalid("unknown reliability '" + rel + "'");
    if (j.value("durability", std::string("volatile")) != "volatile") invalid("durability must be volatile");
    return q;
}

FunctionManifest manifest_from_json(const json& j) {
    try {
        FunctionManifest m;
        m.name = j.at("name").get<std::string>();
        m.version = j.value("version", m.version);
        const json& mode = j.at("mode");
        const auto type = mode.at("type").get<std::string>();
        if (type == "periodic") {
            m.mode = ScheduleMode::periodic;
            m.period_ms = mode.at("period_ms").get<std::uint32_t>();
        } else if (type == "event") {
            m.mode = ScheduleMode::event;
            m.trigger_topic = mode.at("trigger_topic").get<std::string>();
        } else {
            invalid("mode.type must be periodic or event");
        }
        const json subs = j.value("subscriptions", json::array());
        for (const auto& s : subs) {
            SubscriptionSpec spec;
            spec.topic = s.at("topic").get<std::string>();
            spec.cls = channel_class_from_name(s.at("class").get<std::string>());
            spec.depth_or_slots = s.value("depth_or_slots", spec.cls == ChannelClass::low_volume
                                                                 ? IngressDefaults::low_volume_depth
                                                                 : IngressDefaults::high_volume_slots);
            spec.slot_size = s.value("slot_size", IngressDefaults::slot_size);
            if (s.contains("qos")) spec.qos = qos_from_json(s["qos"]);
            m.subscriptions.push_back(std::move(spec));
        }
        const json params = j.value("params", json::object());
        for (const auto& [k, v] : params.items())
            m.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
        m.autostart = j.value("autostart", false);
        const json& entry = j.at("entry");
        const auto kind = entry.at("type").get<std::string>();
        if (kind == "native") {
            m.entry_kind = FunctionManifest::EntryKind::native;
            m.entry_ref = entry.at("builtin").get<std::string>();
        } else if (kind == "guest") {
            m.entry_kind = FunctionManifest::EntryKind::guest;
            m.entry_ref = entry.at("package").get<std::string>();
        } else {
            invalid("entry.type must be native or guest");
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        invalid(e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_manifest) throw;
        invalid(e.what());
    }
}

json to_json(const FunctionManifest& m) {
    json j;
    j["name"] = m.name;
    j["version"] = m.version;
    if (m.mode == ScheduleMode::periodic)
        j["mode"] = {{"type", "periodic"}, {"period_ms", m.period_ms}};
    else
        j["mode"] = {{"type", "event"}, {"trigger_topic", m.trigger_topic}};
    j["subscriptions"] = json::array();
    for (const auto& s : m.subscriptions) {
        json sj = {{"topic", s.topic},
                   {"class", channel_class_name(s.cls)},
                   {"depth_or_slots", s.depth_or_slots},
                   {"qos", to_json(s.qos)}};
        if (s.cls == ChannelClass::high_volume) sj["slot_size"] = s.slot_size;
        j["subscriptions"].push_back(std::move(sj));
    }
    j["params"] = json::object();
    for (const auto& [k, v] : m.params) j["params"][k] = v;
    j["autostart"] = m.autostart;
    if (m.entry_kind == FunctionManifest::EntryKind::native)
        j["entry"] = {{"type", "native"}, {"builtin", m.entry_ref}};
    else
        j["entry"] = {{"type", "guest"}, {"package", m.entry_ref}};
    return j;
}

FunctionManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot open manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        invalid(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

} // namespace edgefn
