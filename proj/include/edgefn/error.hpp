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

#include <stdexcept>
#include <string>
#include <string_view>

namespace edgefn {

// Error categories shared by every subsystem. The C API maps each one to an
// EDGEFN_E_* status code, so keep the two lists in step.
enum class Errc {
    invalid_argument,
    payload_too_large,
    shut_down,
    duplicate_topic,
    unknown_topic,
    wrong_class,
    no_trigger_topic,
    invalid_manifest,
    unknown_builtin,
    guest_load_failure,
    outside_invocation,
    model_not_found,
    shape_mismatch,
    backend_failure,
    auth_failed,
    checksum_mismatch,
    version_conflict,
    unknown_package,
    unknown_vehicle,
    stale_revision,
    malformed,
    empty_input,
    io_failure,
    timeout,
    aborted,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Inverse of errc_name. Throws Errc::malformed for unknown names.
Errc errc_from_name(std::string_view name);

} // namespace edgefn
