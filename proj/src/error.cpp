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

#include "edgefn/error.hpp"

namespace edgefn {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::payload_too_large: return "payload-too-large";
    case Errc::shut_down: return "transport-shut-down";
    case Errc::duplicate_topic: return "duplicate-topic";
    case Errc::unknown_topic: return "unknown-topic";
    case Errc::wrong_class: return "wrong-class";
    case Errc::no_trigger_topic: return "no-trigger-topic-configured";
    case Errc::invalid_manifest: return "invalid-manifest";
    case Errc::unknown_builtin: return "unknown-builtin";
    case Errc::guest_load_failure: return "guest-load-failure";
    case Errc::outside_invocation: return "called-outside-invocation";
    case Errc::model_not_found: return "model-not-found";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::backend_failure: return "backend-failure";
    case Errc::auth_failed: return "auth-failed";
    case Errc::checksum_mismatch: return "checksum-mismatch";
    case Errc::version_conflict: return "version-conflict";
    case Errc::unknown_package: return "unknown-package";
    case Errc::unknown_vehicle: return "unknown-vehicle";
    case Errc::stale_revision: return "stale-revision";
    case Errc::malformed: return "malformed";
    case Errc::empty_input: return "empty-input";
    case Errc::io_failure: return "io-failure";
    case Errc::timeout: return "timeout";
    case Errc::aborted: return "aborted";
    }
    return "unknown";
}

Errc errc_from_name(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Errc::aborted); ++i)
        if (errc_name(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
    throw Error(Errc::malformed, "unknown error code '" + std::string(name) + "'");
}

} // namespace edgefn
