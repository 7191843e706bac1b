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

#include "edgefn/functions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <thread>

#include "edgefn/error.hpp"

namespace edgefn::functions {

namespace {

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) pos = text.size();
        auto piece = text.substr(start, pos - start);
        while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
        while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
        if (!piece.empty()) out.push_back(piece);
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view s, std::string_view what) {
    try {
        std::size_t used = 0;
        double v = std::stod(std::string(s), &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::invalid_argument, "bad number '" + std::string(s) + "' for " + std::string(what));
    }
}

} // namespace

double param_double(const Params& p, std::string_view key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : to_double(it->second, key);
}

std::size_t param_size(const Params& p, std::string_view key, std::size_t fallback) {
    auto it = p.find(key);
    if (it == p.end()) return fallback;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc() || ptr != it->second.data() + it->second.size())
        throw Error(Errc::invalid_argument, "bad integer '" + it->second + "' for " + std::string(key));
    return v;
}

std::string param_string(const Params& p, std::string_view key, std::string fallback) {
    auto it = p.find(key);
    return it == p.end() ? std::move(fallback) : it->second;
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    for (auto piece : split(text, ',')) out.push_back(to_double(piece, "list"));
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::complex<double>> fft(std::span<const double> signal) {
    const std::size_t n = signal.size();
    if (!is_power_of_two(n))
        throw Error(Errc::invalid_argument, "fft length must be a power of two >= 2, got " + std::to_string(n));

    std::vector<std::complex<double>> x(n);
    unsigned bits = 0;
    while ((std::size_t(1) << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (unsigned b = 0; b < bits; ++b)
            if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (bits - 1 - b);
        x[r] = signal[i];
    }

    // Twiddles computed directly per index (no recurrence) to keep the error
    // at a few ulps for every N.
    std::vector<std::complex<double>> twiddle(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
        twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * double(k) / double(n));

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const auto t = twiddle[k * stride] * x[start + k + half];
                const auto u = x[start + k];
                x[start + k] = u + t;
                x[start + k + half] = u - t;
            }
        }
    }
    return x;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n));
    return w;
}

void RoughnessConfig::validate() const {
    if (!is_power_of_two(window_size))
        throw Error(Errc::invalid_argument, "window_size must be a power of two");
    if (!(sample_rate > 0)) throw Error(Errc::invalid_argument, "sample_rate must be positive");
    if (bands.size() != weights.size())
        throw Error(Errc::invalid_argument, "bands and weights differ in length");
    std::vector<Band> sorted = bands;
    std::sort(sorted.begin(), sorted.end(), [](const Band& a, const Band& b) { return a.f_lo < b.f_lo; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!(sorted[i].f_lo >= 0 && sorted[i].f_lo < sorted[i].f_hi && sorted[i].f_hi <= sample_rate / 2))
            throw Error(Errc::invalid_argument, "band outside [0, sample_rate/2] or empty");
        if (i > 0 && sorted[i].f_lo < sorted[i - 1].f_hi)
            throw Error(Errc::invalid_argument, "bands overlap");
    }
    for (double w : weights)
        if (!(w >= 0)) throw Error(Errc::invalid_argument, "weights must be non-negative");
    if (stop_threshold > start_threshold)
        throw Error(Errc::invalid_argument, "stop_threshold must not exceed start_threshold");
}

RoughnessConfig RoughnessConfig::from_params(const Params& p) {
    RoughnessConfig cfg;
    cfg.window_size = param_size(p, "window_size", cfg.window_size);
    cfg.sample_rate = param_double(p, "sample_rate", cfg.sample_rate);
    if (auto it = p.find("bands"); it != p.end()) {
        cfg.bands.clear();
        for (auto piece : split(it->second, ',')) {
            auto dash = piece.find('-', 1);
            if (dash == std::string_view::npos)
                throw Error(Errc::invalid_argument, "band must be lo-hi: " + std::string(piece));
            cfg.bands.push_back({to_double(piece.substr(0, dash), "band"), to_double(piece.substr(dash + 1), "band")});
        }
    }
    if (auto it = p.find("weights"); it != p.end()) cfg.weights = parse_double_list(it->second);
    cfg.start_threshold = param_double(p, "start_threshold", cfg.start_threshold);
    cfg.stop_threshold = param_double(p, "stop_threshold", 0.8 * cfg.start_threshold);
    cfg.validate();
    return cfg;
}

std::vector<double> band_energies(std::span<const double> vertical, const RoughnessConfig& cfg) {
    const std::size_t n = vertical.size();
    if (n != cfg.window_size)
        throw Error(Errc::invalid_argument,
                    "window has " + std::to_string(n) + " samples, expected " + std::to_string(cfg.window_size));
    double mean = 0;
    for (double v : vertical) mean += v;
    mean /= double(n);
    const auto w = hann_window(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = (vertical[i] - mean) * w[i];
    const auto spectrum = fft(y);

    std::vector<double> energy(cfg.bands.size(), 0.0);
    for (std::size_t m = 1; m <= n / 2; ++m) {
        const double f = double(m) * cfg.sample_rate / double(n);
        for (std::size_t b = 0; b < cfg.bands.size(); ++b)
            if (f >= cfg.bands[b].f_lo && f < cfg.bands[b].f_hi) energy[b] += std::norm(spectrum[m]);
    }
    return energy;
}

double roughness_score_signal(std::span<const double> vertical, const RoughnessConfig& cfg) {
    const auto energy = band_energies(vertical, cfg);
    double score = 0;
    for (std::size_t b = 0; b < energy.size(); ++b) score += cfg.weights[b] * energy[b];
    return score;
}

double roughness_score(std::span<const ImuSample> window, const RoughnessConfig& cfg) {
    std::vector<double> z(window.size());
    std::transform(window.begin(), window.end(), z.begin(), [](const ImuSample& s) { return s.accel[2]; });
    return roughness_score_signal(z, cfg);
}

// ---------------------------------------------------------------------------

BrakeDarkConfig BrakeDarkConfig::from_params(const Params& p) {
    BrakeDarkConfig cfg;
    cfg.imu_topic = param_string(p, "imu_topic", cfg.imu_topic);
    cfg.camera_topic = param_string(p, "camera_topic", cfg.camera_topic);
    cfg.braking_samples = param_size(p, "braking_samples", cfg.braking_samples);
    cfg.accel_threshold = param_double(p, "accel_threshold", cfg.accel_threshold);
    cfg.dark_threshold = param_double(p, "dark_threshold", cfg.dark_threshold);
    if (cfg.braking_samples == 0) throw Error(Errc::invalid_argument, "braking_samples must be positive");
    return cfg;
}

double mean_luminance(const ImageView& image) {
    const std::size_t pixels = std::size_t(image.height) * image.width;
    if (pixels == 0) throw Error(Errc::invalid_argument, "empty image");
    const std::uint8_t* p = image.pixels.data();
    double sum = 0;
    if (image.channels == 1) {
        for (std::size_t i = 0; i < pixels; ++i) sum += p[i];
    } else if (image.channels == 3 || image.channels == 4) {
        for (std::size_t i = 0; i < pixels; ++i) {
            const std::uint8_t* px = p + i * image.channels;
            sum += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        }
    } else {
        throw Error(Errc::invalid_argument, "unsupported channel count " + std::to_string(image.channels));
    }
    return sum / double(pixels) / 255.0;
}

double mean_longitudinal(std::span<const ImuSample> samples) {
    if (samples.empty()) throw Error(Errc::invalid_argument, "no samples");
    double sum = 0;
    for (const auto& s : samples) sum += s.accel[0];
    return sum / double(samples.size());
}

// ---------------------------------------------------------------------------

double iou(const Detection& a, const Detection& b) noexcept {
    const double ix = std::max(0.0, double(std::min(a.x2, b.x2)) - double(std::max(a.x1, b.x1)));
    const double iy = std::max(0.0, double(std::min(a.y2, b.y2)) - double(std::max(a.y1, b.y1)));
    const double inter = ix * iy;
    const double area_a = (double(a.x2) - a.x1) * (double(a.y2) - a.y1);
    const double area_b = (double(b.x2) - b.x1) * (double(b.y2) - b.y1);
    const double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0.0;
}

bool detection_order(const Detection& a, const Detection& b) noexcept {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    if (a.x1 != b.x1) return a.x1 < b.x1;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    if (a.x2 != b.x2) return a.x2 < b.x2;
    return a.y2 < b.y2;
}

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
    std::stable_sort(detections.begin(), detections.end(), detection_order);
    std::vector<Detection> kept;
    // Kept boxes bucketed by class so each candidate only checks its own class.
    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (const auto& d : detections) {
        auto& same = by_class[d.class_id];
        const bool suppressed = std::any_of(same.begin(), same.end(),
                                            [&](std::size_t k) { return iou(kept[k], d) > iou_threshold; });
        if (suppressed) continue;
        same.push_back(kept.size());
        kept.push_back(d);
    }
    return kept;
}

DetectorConfig DetectorConfig::from_params(const Params& p) {
    DetectorConfig cfg;
    cfg.camera_topic = param_string(p, "camera_topic", cfg.camera_topic);
    cfg.model = param_string(p, "model", cfg.model);
    cfg.confidence_threshold = param_double(p, "confidence_threshold", cfg.confidence_threshold);
    cfg.iou_threshold = param_double(p, "iou_threshold", cfg.iou_threshold);
    if (auto it = p.find("target_classes"); it != p.end()) {
        cfg.target_classes.clear();
        for (double v : parse_double_list(it->second)) cfg.target_classes.push_back(static_cast<std::uint32_t>(v));
    }
    return cfg;
}

bool frame_selected(const std::vector<Detection>& raw, const DetectorConfig& cfg) {
    const auto kept = nms(raw, cfg.iou_threshold);
    return std::any_of(kept.begin(), kept.end(), [&](const Detection& d) {
        return d.confidence > cfg.confidence_threshold &&
               std::find(cfg.target_classes.begin(), cfg.target_classes.end(), d.class_id) !=
                   cfg.target_classes.end();
    });
}

// ---------------------------------------------------------------------------

std::optional<ActionKind> RecordingLatch::update(bool start_condition, bool stop_condition) {
    if (!recording_ && start_condition) {
        recording_ = true;
        return ActionKind::start_recording;
    }
    if (recording_ && stop_condition) {
        recording_ = false;
        return ActionKind::stop_recording;
    }
    return std::nullopt;
}

void ImuFftLambda::setup(const Params& params) {
    topic_ = param_string(params, "topic", topic_);
    cfg_ = RoughnessConfig::from_params(params);
}

void ImuFftLambda::invoke(Context& ctx) {
    const auto records = ctx.window(topic_, cfg_.window_size);
    if (records.size() < cfg_.window_size) return;
    std::vector<double> z(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) z[i] = decode_imu(records[i].payload).accel[2];
    last_score_ = roughness_score_signal(z, cfg_);
    auto action = latch_.update(last_score_ > cfg_.start_threshold, last_score_ < cfg_.stop_threshold);
    if (action) ctx.trigger({*action, "road_roughness", records.back().seq});
}

void BrakeDarkLambda::setup(const Params& params) { cfg_ = BrakeDarkConfig::from_params(params); }

void BrakeDarkLambda::invoke(Context& ctx) {
    auto frame = ctx.latest(cfg_.camera_topic);
    if (!frame) return;
    auto* lease = std::get_if<SlotLease>(&*frame);
    if (!lease) throw Error(Errc::wrong_class, "camera topic must be high volume");
    const auto records = ctx.window(cfg_.imu_topic, cfg_.braking_samples);
    if (records.size() < cfg_.braking_samples) return;

    double accel_sum = 0;
    for (const auto& r : records) accel_sum += decode_imu(r.payload).accel[0];
    const bool braking = accel_sum / double(records.size()) <= cfg_.accel_threshold;
    const bool dark = mean_luminance(decode_image(lease->data())) < cfg_.dark_threshold;
    const bool both = braking && dark;
    if (auto action = latch_.update(both, !both)) ctx.trigger({*action, "brake_dark", lease->seq()});
}

void DetectorLambda::setup(const Params& params) { cfg_ = DetectorConfig::from_params(params); }

void DetectorLambda::invoke(Context& ctx) {
    auto frame = ctx.latest(cfg_.camera_topic);
    if (!frame) return;
    auto* lease = std::get_if<SlotLease>(&*frame);
    if (!lease) throw Error(Errc::wrong_class, "camera topic must be high volume");
    const ImageView image = decode_image(lease->data());
    // The pixel view aliases the leased slot; no copy is made for inference.
    Tensors inputs{Tensor::borrowed("images", {image.height, image.width, image.channels},
                                    ElementType::u8, image.pixels)};
    const auto outputs = ctx.infer(cfg_.model, inputs);
    if (outputs.empty() || outputs.front().shape.size() != 2 || outputs.front().shape[1] != 6 ||
        outputs.front().type != ElementType::f32)
        throw Error(Errc::backend_failure, "detector output must be a (k, 6) f32 tensor");
    const Tensor& out = outputs.front();
    std::vector<Detection> raw(static_cast<std::size_t>(out.shape[0]));
    const float* v = out.as<float>();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float* row = v + i * 6;
        raw[i] = Detection{row[0], row[1], row[2], row[3], static_cast<std::uint32_t>(row[4]), row[5]};
    }
    if (frame_selected(raw, cfg_)) ctx.trigger({ActionKind::mark, "detection", lease->seq()});
}

void EchoLambda::setup(const Params& params) { delay_ms_ = param_double(params, "delay_ms", 0.0); }

void EchoLambda::invoke(Context& ctx) {
    if (delay_ms_ > 0)
        std::this_thread::sleep_for(std::chrono::nanoseconds(static_cast<std::int64_t>(delay_ms_ * 1e6)));
    ctx.trigger({ActionKind::mark, "echo", std::nullopt});
}

void register_builtins(BuiltinRegistry& registry) {
    registry.add("imu_fft", [] { return std::make_unique<ImuFftLambda>(); });
    registry.add("brake_dark", [] { return std::make_unique<BrakeDarkLambda>(); });
    registry.add("detector", [] { return std::make_unique<DetectorLambda>(); });
    registry.add("echo", [] { return std::make_unique<EchoLambda>(); });
}

} // namespace edgefn::functions
