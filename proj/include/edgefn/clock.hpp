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

#include <chrono>
#include <cstdint>

namespace edgefn {

// All timestamps in the system are nanoseconds on the process monotonic clock.
// On Linux std::chrono::steady_clock reads CLOCK_MONOTONIC, so stamps taken in
// different processes on the same host are directly comparable.
using Nanos = std::int64_t;

inline Nanos monotonic_now() noexcept {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline std::chrono::steady_clock::time_point to_time_point(Nanos ns) {
    return std::chrono::steady_clock::time_point(std::chrono::nanoseconds(ns));
}

constexpr Nanos from_millis(double ms) { return static_cast<Nanos>(ms * 1e6); }
constexpr double to_millis(Nanos ns) { return static_cast<double>(ns) / 1e6; }

} // namespace edgefn
