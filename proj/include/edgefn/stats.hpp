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

#include <cstddef>
#include <span>
#include <string_view>

namespace edgefn {

struct StatsSummary {
    std::size_t n = 0;
    double min = 0;
    double max = 0;
    double mean = 0;
    // Median absolute deviation from the median, without a consistency factor.
    double mad = 0;
    // Nearest rank: the ceil(0.95 n)-th smallest sample.
    double p95 = 0;
};

// Median of an unsorted sample; even sizes average the two middle values.
double median(std::span<const double> samples);
// Throws Errc::empty_input when samples is empty.
StatsSummary stats(std::span<const double> samples);

enum class MwuMethod { exact, normal_approx };
std::string_view mwu_method_name(MwuMethod m) noexcept;

struct MwuResult {
    // min(U_a, U_b), where U_a counts pairs with a > b plus half the ties.
    double u = 0;
    double p_two_sided = 1;
    MwuMethod method = MwuMethod::exact;
};

// Samples up to this combined size use the exact permutation distribution.
inline constexpr std::size_t kMwuExactLimit = 20;

// Mann-Whitney U test. Small samples get the exact null distribution of the
// rank sum (ties handled through midranks); larger ones use the normal
// approximation with tie-corrected variance and a 0.5 continuity correction.
MwuResult mwu(std::span<const double> a, std::span<const double> b);
MwuResult mwu_exact(std::span<const double> a, std::span<const double> b);
MwuResult mwu_normal(std::span<const double> a, std::span<const double> b);

} // namespace edgefn
