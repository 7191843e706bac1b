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

// Reference implementations used only by the tests. Each one takes the most
// direct route to the answer and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

// O(N^2) DFT. The phase index m*n is reduced mod N before scaling so the
// argument stays small and exact.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> acc = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t r = (m * k) % n;
            const double angle = -2.0 * std::numbers::pi * double(r) / double(n);
            acc += x[k] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[m] = acc;
    }
    return out;
}

// One-sided band energy of a mean-removed, Hann-windowed signal via the direct DFT.
inline double band_energy(const std::vector<double>& signal, double sample_rate, double f_lo, double f_hi) {
    const std::size_t n = signal.size();
    const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / double(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = (signal[i] - mean) * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n)));
    const auto spec = direct_dft(y);
    double e = 0;
    for (std::size_t m = 1; m <= n / 2; ++m) {
        const double f = double(m) * sample_rate / double(n);
        if (f >= f_lo && f < f_hi) e += std::norm(spec[m]);
    }
    return e;
}

struct Box {
    float x1, y1, x2, y2;
    std::uint32_t cls;
    float conf;
};

inline double box_iou(const Box& a, const Box& b) {
    const double w = std::max(0.0, double(std::min(a.x2, b.x2)) - double(std::max(a.x1, b.x1)));
    const double h = std::max(0.0, double(std::min(a.y2, b.y2)) - double(std::max(a.y1, b.y1)));
    const double inter = w * h;
    const double uni = (double(a.x2) - a.x1) * (double(a.y2) - a.y1) + (double(b.x2) - b.x1) * (double(b.y2) - b.y1) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Literal greedy NMS: pick the head of the ordered list, delete every
// same-class box overlapping it beyond the threshold, repeat.
inline std::vector<Box> greedy_nms(std::vector<Box> boxes, double threshold) {
    auto before = [](const Box& a, const Box& b) {
        if (a.conf != b.conf) return a.conf > b.conf;
        if (a.cls != b.cls) return a.cls < b.cls;
        if (a.x1 != b.x1) return a.x1 < b.x1;
        if (a.y1 != b.y1) return a.y1 < b.y1;
        if (a.x2 != b.x2) return a.x2 < b.x2;
        return a.y2 < b.y2;
    };
    std::vector<Box> kept;
    while (!boxes.empty()) {
        auto head_it = boxes.begin();
        for (auto it = boxes.begin(); it != boxes.end(); ++it)
            if (before(*it, *head_it)) head_it = it;
        const Box head = *head_it;
        boxes.erase(head_it);
        kept.push_back(head);
        std::vector<Box> rest;
        for (const auto& b : boxes)
            if (!(b.cls == head.cls && box_iou(b, head) > threshold)) rest.push_back(b);
        boxes = std::move(rest);
    }
    return kept;
}

struct Summary {
    double min, max, mean, mad, p95;
};

inline double sorted_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Summary summarize(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    Summary s{};
    s.min = v.front();
    s.max = v.back();
    long double total = 0;
    for (double x : v) total += x;
    s.mean = double(total / v.size());
    const double med = sorted_median(v);
    std::vector<double> dev;
    for (double x : v) dev.push_back(std::fabs(x - med));
    s.mad = sorted_median(dev);
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * double(v.size())));
    s.p95 = v[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

// U statistic of sample a against b by direct pair counting.
inline double u_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0;
    for (double x : a)
        for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return u;
}

// Exact two-sided p by enumerating every way to split the pooled sample into
// groups of the original sizes.
inline double exhaustive_mwu_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), na = a.size();
    const double u_obs = u_statistic(a, b);
    std::uint64_t total = 0, le = 0, ge = 0;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + na, true);
    do {
        std::vector<double> ga, gb;
        for (std::size_t i = 0; i < n; ++i) (pick[i] ? ga : gb).push_back(pooled[i]);
        const double u = u_statistic(ga, gb);
        ++total;
        if (u <= u_obs + 1e-9) ++le;
        if (u >= u_obs - 1e-9) ++ge;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    const double p = 2.0 * double(std::min(le, ge)) / double(total);
    return std::min(1.0, p);
}

} // namespace oracle
