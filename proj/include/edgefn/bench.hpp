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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/bag.hpp"
#include "edgefn/functions.hpp"
#include "edgefn/host.hpp"
#include "edgefn/manifest.hpp"
#include "edgefn/payloads.hpp"
#include "edgefn/stats.hpp"
#include "edgefn/transport.hpp"

namespace edgefn::bench {

// ---------------------------------------------------------------------------
// Synthetic bags
// ---------------------------------------------------------------------------

enum class ImuProfile { smooth, rough };

struct ImuSegment {
    double duration_s = 1;
    ImuProfile profile = ImuProfile::smooth;
    // Constant longitudinal acceleration, m/s^2; negative while braking.
    double longitudinal = 0;
    // Vertical vibration on top of gravity. Defaults depend on the profile.
    std::optional<double> amplitude;
    std::optional<double> frequency_hz;
    std::optional<double> noise;
};

struct CameraSegment {
    double duration_s = 1;
    std::uint8_t brightness = 180;
    // Boxes embedded in every frame of the segment for the mock detector.
    std::vector<Detection> detections;
};

struct SynthSpec {
    std::string imu_topic = "/sensors/imu";
    double imu_rate_hz = 100;
    std::vector<ImuSegment> imu;
    std::string camera_topic = "/sensors/camera";
    double camera_rate_hz = 10;
    std::uint32_t width = 64;
    std::uint32_t height = 48;
    std::uint32_t channels = 1;
    std::vector<CameraSegment> camera;
    std::uint64_t seed = 1;

    void validate() const;
};

// JSON mirror of SynthSpec:
// {"seed": 1,
//  "imu": {"topic": "/sensors/imu", "rate_hz": 100,
//          "segments": [{"duration_s": 10, "profile": "smooth"|"rough", "longitudinal": 0,
//                        "amplitude": 2.0, "frequency_hz": 20, "noise": 0.2}]},
//  "camera": {"topic": "/sensors/camera", "rate_hz": 10, "width": 64, "height": 48, "channels": 1,
//             "segments": [{"duration_s": 5, "brightness": 30,
//                           "detections": [{"box": [x1, y1, x2, y2], "class": 0, "confidence": 0.9}]}]}}
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

// Smooth road, a rough stretch, then a dark braking stretch, with a few
// frames carrying detections. Used by the CLI default and the end-to-end tests.
SynthSpec default_synth_spec();

// Deterministic for a given spec (including its seed). IMU samples are
// ImuSample payloads; frames are image_frame payloads whose pixel data starts
// with a mock detection block when the segment has detections.
Bag synth_bag(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct ReplayOptions {
    double speed = 1.0;
    // Stamp each envelope with the monotonic time at send instead of the bag timestamp.
    bool realign = true;
    bool loop = false;
    // Stop after this many passes when looping; 0 means until stopped.
    std::size_t max_loops = 0;
};

struct ReplayReport {
    std::uint64_t records_sent = 0;
    Nanos duration = 0;
    std::size_t passes = 0;
};

// Called after every publish with the bag record, the transport result and the
// source timestamp used.
using ReplayObserver = std::function<void(const BagRecord&, const PublishResult&, Nanos source_ts)>;

// Publishes the bag in timestamp order preserving inter-record gaps scaled by
// 1/speed. A loop restarts after the median inter-record gap. Returns early
// when `stop` becomes true.
ReplayReport replay(const Bag& bag, Transport& transport, const ReplayOptions& options,
                    const std::atomic<bool>* stop = nullptr, const ReplayObserver& observer = {});

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

struct PhasePlan {
    double warmup_s = 20;
    std::size_t phase_count = 3;
    double phase_length_s = 20;

    void validate() const;
    Nanos total() const;
};

// Phase (1-based) for an arrival `offset` after measurement start; nullopt
// during warm-up and after the last phase.
std::optional<std::size_t> phase_of(Nanos offset, const PhasePlan& plan);

struct MeasuredRtt {
    RttRecord record;
    Nanos arrival = 0;
    std::size_t phase = 0;
};

struct Measurement {
    PhasePlan plan;
    Nanos started = 0;
    // phases[k] holds the records of phase k + 1.
    std::vector<std::vector<MeasuredRtt>> phases;
    std::uint64_t discarded_warmup = 0;
    std::uint64_t malformed = 0;
};

// Collects RttRecords from "/lambda/rtt" on one thread for the whole plan.
// `on_start` runs right after the subscription exists, which is where callers
// start replay. Returns early (with what it has) when `stop` becomes true.
Measurement measure(Transport& transport, const PhasePlan& plan, const std::function<void()>& on_start = {},
                    const std::atomic<bool>* stop = nullptr);

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct CsvRow {
    std::string function;
    std::string implementation;
    std::size_t phase = 0;
    Nanos t_in = 0;
    Nanos t_out = 0;
    double rtt_ms = 0;
};

std::vector<CsvRow> rows_from(const Measurement& m, const std::string& implementation);

// Header: function,implementation,phase,t_in_ns,t_out_ns,rtt_ms
void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

struct SummaryRow {
    std::string function;
    std::string implementation;
    // "1", "2", ... or "all" for the pooled phases.
    std::string phase;
    StatsSummary stats;
};

// Per (function, implementation): one row per phase plus a pooled row.
std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows);
// Fixed-width table with Min/Max/Mean/MAD/95th columns in milliseconds.
std::string format_summary(const std::vector<SummaryRow>& rows);

// Box plots (whiskers at min/max, box at quartiles, line at the median) of
// RTT per "function/implementation" label on a logarithmic axis, as SVG.
std::string box_plot_svg(const std::vector<CsvRow>& rows);
void write_box_plot(const std::filesystem::path& path, const std::vector<CsvRow>& rows);

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

struct BenchRunConfig {
    std::vector<FunctionManifest> manifests;
    PhasePlan plan;
    ReplayOptions replay{1.0, true, true, 0};
    std::string implementation = "edgefn";
    // Passed to every host; the default mock backend when null.
    std::shared_ptr<InferenceBackend> backend;
};

struct BenchRunResult {
    Measurement measurement;
    ReplayReport replay;
    std::vector<CsvRow> rows;
    std::vector<HostStatus> hosts;
};

// Hosts every manifest in-process with RTT instrumentation on one local bus,
// replays the bag (looping by default) for the whole plan and measures.
BenchRunResult run_bench(const Bag& bag, const BenchRunConfig& config, const std::atomic<bool>* stop = nullptr);

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

struct Calibration {
    double start_threshold = 0;
    double stop_threshold = 0;
    double low_score = 0;   // 10th percentile of window scores
    double high_score = 0;  // 90th percentile of window scores
    std::size_t windows = 0;
};

// Scores every full window of the IMU topic (advancing by `stride` samples)
// and places start_threshold at the geometric mean of the 10th and 90th
// percentile scores; stop_threshold is 0.8 x start.
Calibration calibrate(const Bag& bag, const std::string& imu_topic, const functions::RoughnessConfig& cfg,
                      std::size_t stride = 1);

} // namespace edgefn::bench
