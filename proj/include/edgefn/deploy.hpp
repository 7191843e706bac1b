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
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/manifest.hpp"

namespace edgefn {

enum class PackageKind { native_ref, guest_archive };
std::string_view package_kind_name(PackageKind k) noexcept;
PackageKind package_kind_from_name(std::string_view name);

// One function a vehicle should run: the effective manifest (template plus
// deployment overrides) and the checksum of the package it came from.
struct DeployedFunction {
    FunctionManifest manifest;
    std::string checksum;
    PackageKind kind = PackageKind::native_ref;

    // Two entries are interchangeable when manifest and checksum match.
    bool same_as(const DeployedFunction& other) const;
};

struct DesiredState {
    std::string vehicle_id;
    std::uint64_t revision = 0;
    std::vector<DeployedFunction> functions;

    // Throws invalid_manifest on duplicate names or invalid manifests.
    void validate() const;
    const DeployedFunction* find(std::string_view name) const;
    // The subset with autostart set, same revision.
    DesiredState autostart_only() const;
};

nlohmann::json to_json(const DeployedFunction& f);
DeployedFunction deployed_function_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DesiredState& s);
DesiredState desired_state_from_json(const nlohmann::json& j);

} // namespace edgefn
