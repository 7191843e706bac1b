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

#include "edgefn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "edgefn/error.hpp"

namespace edgefn {

namespace {

double sorted_median(const std::vector<double>& v) {
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void require_samples(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error(Errc::empty_input, "mann-whitney needs two non-empty samples");
}

struct Ranked {
    // Twice the midrank of each pooled value, so tied ranks stay integral.
    std::vector<long> doubled_rank;
    // Sum over tie groups of t^3 - t.
    double tie_term = 0;
};

// Pooled sample is a followed by b.
Ranked rank_pooled(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size() + b.size();
    std::vector<std::pair<double, std::size_t>> v;
    v.reserve(n);
    for (std::size_t i = 0; i < a.size(); ++i) v.emplace_back(a[i], i);
    for (std::size_t i = 0; i < b.size(); ++i) v.emplace_back(b[i], a.size() + i);
    std::sort(v.begin(), v.end());
    Ranked r;
    r.doubled_rank.resize(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && v[j].first == v[i].first) ++j;
        // Ranks i+1 .. j share the midrank (i+1+j)/2.
        const long doubled = static_cast<long>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) r.doubled_rank[v[k].second] = doubled;
        const double t = double(j - i);
        r.tie_term += t * t * t - t;
        i = j;
    }
    return r;
}

// U_a from the doubled rank sum of a: U_a = R_a - n_a (n_a + 1) / 2.
double u_from_doubled(long doubled_sum, std::size_t na) {
    return (double(doubled_sum) - double(na) * double(na + 1)) / 2.0;
}

} // namespace

double median(std::span<const double> samples) {
    if (samples.empty()) throw Error(Errc::empty_input, "median of an empty sample");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    return sorted_median(v);
}

StatsSummary stats(std::span<const double> samples) {
    if (samples.empty()) throw Error(Errc::empty_input, "stats of an empty sample");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    StatsSummary s;
    s.n = v.size();
    s.min = v.front();
    s.max = v.back();
    // Compensated summation keeps the mean stable for long runs.
    double sum = 0, carry = 0;
    for (double x : v) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    s.mean = sum / double(s.n);
    const double med = sorted_median(v);
    std::vector<double> dev(v.size());
    std::transform(v.begin(), v.end(), dev.begin(), [med](double x) { return std::fabs(x - med); });
    std::sort(dev.begin(), dev.end());
    s.mad = sorted_median(dev);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(s.n)));
    s.p95 = v[std::clamp<std::size_t>(rank, 1, s.n) - 1];
    return s;
}

std::string_view mwu_method_name(MwuMethod m) noexcept {
    return m == MwuMethod::exact ? "exact" : "normal_approx";
}

MwuResult mwu_exact(std::span<const double> a, std::span<const double> b) {
    require_samples(a, b);
    const std::size_t na = a.size(), n = a.size() + b.size();
    const Ranked ranked = rank_pooled(a, b);
    long observed = 0;
    for (std::size_t i = 0; i < na; ++i) observed += ranked.doubled_rank[i];

    // ways[k][s]: number of k-subsets of the pooled ranks with doubled sum s.
    const long max_sum = std::accumulate(ranked.doubled_rank.begin(), ranked.doubled_rank.end(), 0L);
    std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const long r = ranked.doubled_rank[i];
        for (std::size_t k = std::min(na, i + 1); k >= 1; --k)
            for (long s = max_sum; s >= r; --s) ways[k][s] += ways[k - 1][s - r];
    }
    double total = 0, le = 0, ge = 0;
    for (long s = 0; s <= max_sum; ++s) {
        const double w = ways[na][s];
        total += w;
        if (s <= observed) le += w;
        if (s >= observed) ge += w;
    }
    const double ua = u_from_doubled(observed, na);
    MwuResult res;
    res.u = std::min(ua, double(na) * double(b.size()) - ua);
    res.p_two_sided = std::min(1.0, 2.0 * std::min(le, ge) / total);
    res.method = MwuMethod::exact;
    return res;
}

MwuResult mwu_normal(std::span<const double> a, std::span<const double> b) {
    require_samples(a, b);
    const double na = double(a.size()), nb = double(b.size()), n = na + nb;
    const Ranked ranked = rank_pooled(a, b);
    long doubled = 0;
    for (std::size_t i = 0; i < a.size(); ++i) doubled += ranked.doubled_rank[i];
    const double ua = u_from_doubled(doubled, a.size());
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
    MwuResult res;
    res.u = std::min(ua, na * nb - ua);
    res.method = MwuMethod::normal_approx;
    if (var <= 0) {
        res.p_two_sided = 1.0;
        return res;
    }
    const double z = std::max(0.0, std::fabs(ua - mu) - 0.5) / std::sqrt(var);
    res.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return res;
}

MwuResult mwu(std::span<const double> a, std::span<const double> b) {
    require_samples(a, b);
    return a.size() + b.size() <= kMwuExactLimit ? mwu_exact(a, b) : mwu_normal(a, b);
}

} // namespace edgefn
