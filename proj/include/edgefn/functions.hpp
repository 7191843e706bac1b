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

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgefn/context.hpp"
#include "edgefn/payloads.hpp"

namespace edgefn::functions {

// ---------------------------------------------------------------------------
// Spectral analysis
// ---------------------------------------------------------------------------

// Unnormalised forward DFT, X[m] = sum_n x[n] e^{-2 pi i m n / N}, by iterative
// radix-2 decimation in time. N must be a power of two >= 2.
std::vector<std::complex<double>> fft(std::span<const double> signal);

// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t n);

struct Band {
    double f_lo = 0;
    double f_hi = 0;
};

struct RoughnessConfig {
    std::size_t window_size = 256;
    double sample_rate = 100.0;
    std::vector<Band> bands{{0.5, 4.0}, {4.0, 12.0}, {12.0, 30.0}};
    std::vector<double> weights{0.2, 0.5, 0.3};
    double start_threshold = 1.0;
    double stop_threshold = 0.8;

    void validate() const;
    static RoughnessConfig from_params(const Params& params);
};

// Bin m (1 <= m <= N/2) sits at m * sample_rate / N and belongs to a band when
// f_lo <= f < f_hi.
std::vector<double> band_energies(std::span<const double> vertical, const RoughnessConfig& cfg);

// Vertical acceleration, mean removed, Hann windowed, FFT; score is the
// weighted sum of one-sided band energies sum |X[m]|^2.
double roughness_score(std::span<const ImuSample> window, const RoughnessConfig& cfg);
double roughness_score_signal(std::span<const double> vertical, const RoughnessConfig& cfg);

// ---------------------------------------------------------------------------
// Brake + dark
// ---------------------------------------------------------------------------

struct BrakeDarkConfig {
    std::string imu_topic = "/sensors/imu";
    std::string camera_topic = "/sensors/camera";
    std::size_t braking_samples = 10;
    double accel_threshold = -3.0;          // m/s^2, braking when mean <= this
    double dark_threshold = 50.0 / 255.0;   // normalised luminance, dark when mean < this

    static BrakeDarkConfig from_params(const Params& params);
};

// Mean luminance in [0, 1]. Grey frames use the byte mean; RGB(A) frames use
// BT.601 luma 0.299 R + 0.587 G + 0.114 B per pixel.
double mean_luminance(const ImageView& image);
double mean_longitudinal(std::span<const ImuSample> samples);

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

double iou(const Detection& a, const Detection& b) noexcept;

// Confidence descending, then class id ascending, then x1 ascending; the
// remaining box coordinates break any further ties.
bool detection_order(const Detection& a, const Detection& b) noexcept;

// Greedy class-wise non-maximum suppression.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

struct DetectorConfig {
    std::string camera_topic = "/sensors/camera";
    std::string model = "mock-detector";
    double confidence_threshold = 0.5;  // tau, kept when confidence > tau
    double iou_threshold = 0.45;
    std::vector<std::uint32_t> target_classes{0, 1};

    static DetectorConfig from_params(const Params& params);
};

// True when any post-NMS detection is a target class with confidence > tau.
bool frame_selected(const std::vector<Detection>& raw, const DetectorConfig& cfg);

// ---------------------------------------------------------------------------
// Builtin lambdas
// ---------------------------------------------------------------------------

// Hysteresis state shared by the start/stop lambdas.
class RecordingLatch {
public:
    // Returns the action to emit for this observation, if any.
    std::optional<ActionKind> update(bool start_condition, bool stop_condition);
    bool recording() const noexcept { return recording_; }

private:
    bool recording_ = false;
};

class ImuFftLambda final : public FunctionBody {
public:
    void setup(const Params& params) override;
    void invoke(Context& ctx) override;

    const RoughnessConfig& config() const noexcept { return cfg_; }
    double last_score() const noexcept { return last_score_; }

private:
    std::string topic_ = "/sensors/imu";
    RoughnessConfig cfg_;
    RecordingLatch latch_;
    double last_score_ = 0;
};

class BrakeDarkLambda final : public FunctionBody {
public:
    void setup(const Params& params) override;
    void invoke(Context& ctx) override;

private:
    BrakeDarkConfig cfg_;
    RecordingLatch latch_;
};

class DetectorLambda final : public FunctionBody {
public:
    void setup(const Params& params) override;
    void invoke(Context& ctx) override;

private:
    DetectorConfig cfg_;
};

// Diagnostic builtin: optionally sleeps `delay_ms`, then emits one mark per
// invocation. Used to measure framework overhead.
class EchoLambda final : public FunctionBody {
public:
    void setup(const Params& params) override;
    void invoke(Context& ctx) override;

private:
    double delay_ms_ = 0;
};

void register_builtins(BuiltinRegistry& registry);

// Parameter helpers shared by the builtins.
double param_double(const Params& p, std::string_view key, double fallback);
std::size_t param_size(const Params& p, std::string_view key, std::size_t fallback);
std::string param_string(const Params& p, std::string_view key, std::string fallback);
std::vector<double> parse_double_list(std::string_view text);

} // namespace edgefn::functions
