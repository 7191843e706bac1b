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

#include "edgefn/deploy.hpp"

#include "edgefn/error.hpp"

namespace edgefn {

using json = nlohmann::json;

std::string_view package_kind_name(PackageKind k) noexcept {
    return k == PackageKind::native_ref ? "native" : "guest";
}

PackageKind package_kind_from_name(std::string_view name) {
    if (name == "native") return PackageKind::native_ref;
    if (name == "guest") return PackageKind::guest_archive;
    throw Error(Errc::invalid_argument, "unknown package kind '" + std::string(name) + "'");
}

bool DeployedFunction::same_as(const DeployedFunction& other) const {
    return checksum == other.checksum && kind == other.kind && to_json(manifest) == to_json(other.manifest);
}

void DesiredState::validate() const {
    std::set<std::string, std::less<>> names;
    for (const auto& f : functions) {
        f.manifest.validate();
        if (!names.insert(f.manifest.name).second)
            throw Error(Errc::invalid_manifest, "duplicate function name '" + f.manifest.name + "'");
    }
}

const DeployedFunction* DesiredState::find(std::string_view name) const {
    for (const auto& f : functions)
        if (f.manifest.name == name) return &f;
    return nullptr;
}

DesiredState DesiredState::autostart_only() const {
    DesiredState out{vehicle_id, revision, {}};
    for (const auto& f : functions)
        if (f.manifest.autostart) out.functions.push_back(f);
    return out;
}

json to_json(const DeployedFunction& f) {
    return {{"manifest", to_json(f.manifest)}, {"checksum", f.checksum}, {"kind", package_kind_name(f.kind)}};
}

DeployedFunction deployed_function_from_json(const json& j) {
    try {
        DeployedFunction f;
        f.manifest = manifest_from_json(j.at("manifest"));
        f.checksum = j.at("checksum").get<std::string>();
        f.kind = package_kind_from_name(j.value("kind", std::string("native")));
        return f;
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, std::string("deployed function: ") + e.what());
    }
}

json to_json(const DesiredState& s) {
    json fns = json::array();
    for (const auto& f : s.functions) fns.push_back(to_json(f));
    return {{"vehicle_id", s.vehicle_id}, {"revision", s.revision}, {"functions", fns}};
}

DesiredState desired_state_from_json(const json& j) {
    try {
        DesiredState s;
        s.vehicle_id = j.at("vehicle_id").get<std::string>();
        s.revision = j.at("revision").get<std::uint64_t>();
        for (const auto& f : j.at("functions")) s.functions.push_back(deployed_function_from_json(f));
        return s;
    } catch (const json::exception& e) {
        throw Error(Errc::malformed, std::string("desired state: ") + e.what());
    }
}

} // namespace edgefn
