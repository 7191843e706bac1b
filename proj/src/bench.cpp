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

#include "edgefn/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "edgefn/error.hpp"

namespace edgefn::bench {

using nlohmann::json;

namespace {

constexpr double kGravity = 9.81;

Nanos seconds_to_nanos(double s) { return static_cast<Nanos>(std::llround(s * 1e9)); }

// Box-Muller over raw engine bits, so the stream is identical on every
// standard library (std::normal_distribution is not).
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = unit();
        while (u1 <= 0) u1 = unit();
        const double u2 = unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2 * std::numbers::pi * u2);
        return r * std::cos(2 * std::numbers::pi * u2);
    }

private:
    double unit() { return double(rng_() >> 11) * 0x1.0p-53; }
    std::mt19937_64 rng_;
    std::optional<double> spare_;
};

struct ProfileDefaults {
    double amplitude, frequency, noise;
};

ProfileDefaults defaults_for(ImuProfile p) {
    return p == ImuProfile::smooth ? ProfileDefaults{0.05, 1.5, 0.01} : ProfileDefaults{2.0, 20.0, 0.3};
}

std::string profile_name(ImuProfile p) { return p == ImuProfile::smooth ? "smooth" : "rough"; }

ImuProfile profile_from_name(const std::string& s) {
    if (s == "smooth") return ImuProfile::smooth;
    if (s == "rough") return ImuProfile::rough;
    throw Error(Errc::invalid_argument, "unknown IMU profile: " + s);
}

void sleep_until_or_stop(Nanos deadline, const std::atomic<bool>* stop) {
    for (;;) {
        if (stop && stop->load()) return;
        const Nanos now = monotonic_now();
        if (now >= deadline) return;
        std::this_thread::sleep_for(std::chrono::nanoseconds(std::min<Nanos>(deadline - now, 50'000'000)));
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double nearest_rank(const std::vector<double>& sorted, double q) {
    const auto rank = static_cast<std::size_t>(std::ceil(q * double(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

} // namespace

// --- Synthetic bags ---------------------------------------------------------

void SynthSpec::validate() const {
    if (imu_rate_hz <= 0 || camera_rate_hz <= 0) throw Error(Errc::invalid_argument, "rates must be positive");
    if (width == 0 || height == 0 || (channels != 1 && channels != 3 && channels != 4))
        throw Error(Errc::invalid_argument, "frame must be non-empty with 1, 3 or 4 channels");
    if (imu_topic.empty() || camera_topic.empty() || imu_topic == camera_topic)
        throw Error(Errc::invalid_argument, "IMU and camera topics must be distinct and non-empty");
    for (const auto& s : imu)
        if (!(s.duration_s > 0)) throw Error(Errc::invalid_argument, "IMU segment duration must be positive");
    const std::size_t pixels = std::size_t(width) * height * channels;
    for (const auto& s : camera) {
        if (!(s.duration_s > 0)) throw Error(Errc::invalid_argument, "camera segment duration must be positive");
        if (kMockHeaderSize + kMockRecordSize * s.detections.size() > pixels)
            throw Error(Errc::invalid_argument, "frame too small for its embedded detections");
    }
}

SynthSpec synth_spec_from_json(const json& j) {
    SynthSpec s;
    try {
        s.seed = j.value("seed", s.seed);
        if (j.contains("imu")) {
            const json& imu = j.at("imu");
            s.imu_topic = imu.value("topic", s.imu_topic);
            s.imu_rate_hz = imu.value("rate_hz", s.imu_rate_hz);
            for (const auto& seg : imu.at("segments")) {
                ImuSegment g;
                g.duration_s = seg.at("duration_s").get<double>();
                g.profile = profile_from_name(seg.value("profile", std::string("smooth")));
                g.longitudinal = seg.value("longitudinal", 0.0);
                if (seg.contains("amplitude")) g.amplitude = seg.at("amplitude").get<double>();
                if (seg.contains("frequency_hz")) g.frequency_hz = seg.at("frequency_hz").get<double>();
                if (seg.contains("noise")) g.noise = seg.at("noise").get<double>();
                s.imu.push_back(g);
            }
        }
        if (j.contains("camera")) {
            const json& cam = j.at("camera");
            s.camera_topic = cam.value("topic", s.camera_topic);
            s.camera_rate_hz = cam.value("rate_hz", s.camera_rate_hz);
            s.width = cam.value("width", s.width);
            s.height = cam.value("height", s.height);
            s.channels = cam.value("channels", s.channels);
            for (const auto& seg : cam.at("segments")) {
                CameraSegment c;
                c.duration_s = seg.at("duration_s").get<double>();
                c.brightness = seg.value("brightness", c.brightness);
                for (const auto& d : seg.value("detections", json::array())) {
                    const auto box = d.at("box").get<std::vector<float>>();
                    if (box.size() != 4) throw Error(Errc::invalid_argument, "detection box needs 4 values");
                    c.detections.push_back(
                        {box[0], box[1], box[2], box[3], d.at("class").get<std::uint32_t>(), d.at("confidence").get<float>()});
                }
                s.camera.push_back(std::move(c));
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("invalid synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

json to_json(const SynthSpec& s) {
    json imu_segments = json::array();
    for (const auto& g : s.imu) {
        json seg{{"duration_s", g.duration_s}, {"profile", profile_name(g.profile)}, {"longitudinal", g.longitudinal}};
        if (g.amplitude) seg["amplitude"] = *g.amplitude;
        if (g.frequency_hz) seg["frequency_hz"] = *g.frequency_hz;
        if (g.noise) seg["noise"] = *g.noise;
        imu_segments.push_back(seg);
    }
    json cam_segments = json::array();
    for (const auto& c : s.camera) {
        json dets = json::array();
        for (const auto& d : c.detections)
            dets.push_back({{"box", {d.x1, d.y1, d.x2, d.y2}}, {"class", d.class_id}, {"confidence", d.confidence}});
        cam_segments.push_back({{"duration_s", c.duration_s}, {"brightness", c.brightness}, {"detections", dets}});
    }
    return {{"seed", s.seed},
            {"imu", {{"topic", s.imu_topic}, {"rate_hz", s.imu_rate_hz}, {"segments", imu_segments}}},
            {"camera",
             {{"topic", s.camera_topic},
              {"rate_hz", s.camera_rate_hz},
              {"width", s.width},
              {"height", s.height},
              {"channels", s.channels},
              {"segments", cam_segments}}}};
}

SynthSpec default_synth_spec() {
    SynthSpec s;
    // 0-8 s smooth, 8-16 s rough, 16-30 s smooth; braking from 18 s to 26 s.
    s.imu = {{8, ImuProfile::smooth, 0.0, {}, {}, {}},
             {8, ImuProfile::rough, 0.0, {}, {}, {}},
             {2, ImuProfile::smooth, 0.0, {}, {}, {}},
             {8, ImuProfile::smooth, -5.0, {}, {}, {}},
             {4, ImuProfile::smooth, 0.0, {}, {}, {}}};
    // Bright until 20 s, dark 20-24 s, bright again; people in view at 4-5 s and 12-13 s.
    const Detection person{10, 8, 30, 40, 0, 0.9f};
    const Detection car{30, 10, 60, 30, 2, 0.95f};
    s.camera = {{4, 180, {car}},
                {1, 180, {person, Detection{12, 9, 31, 41, 0, 0.6f}}},
                {7, 180, {}},
                {1, 160, {Detection{5, 5, 20, 20, 1, 0.7f}}},
                {7, 180, {}},
                {4, 30, {}},
                {6, 180, {}}};
    return s;
}

Bag synth_bag(const SynthSpec& spec) {
    spec.validate();
    Bag bag;
    const auto imu_topic = bag.topic_index(spec.imu_topic, ContentType::imu_sample, json{{"rate_hz", spec.imu_rate_hz}});
    const auto cam_topic = bag.topic_index(
        spec.camera_topic, ContentType::image_frame,
        json{{"height", spec.height}, {"width", spec.width}, {"channels", spec.channels}, {"rate_hz", spec.camera_rate_hz}});

    std::vector<BagRecord> records;
    Gaussian noise(spec.seed);
    double t_seg = 0;
    std::size_t i = 0;
    for (const auto& seg : spec.imu) {
        const auto d = defaults_for(seg.profile);
        const double amp = seg.amplitude.value_or(d.amplitude);
        const double freq = seg.frequency_hz.value_or(d.frequency);
        const double sigma = seg.noise.value_or(d.noise);
        const double t_end = t_seg + seg.duration_s;
        for (;; ++i) {
            const double t = double(i) / spec.imu_rate_hz;
            if (t >= t_end - 1e-12) break;
            ImuSample s;
            s.ts = seconds_to_nanos(t);
            s.accel = {seg.longitudinal, 0.0, kGravity + amp * std::sin(2 * std::numbers::pi * freq * t) + sigma * noise()};
            records.push_back({imu_topic, static_cast<std::uint64_t>(s.ts), encode_imu(s)});
        }
        t_seg = t_end;
    }

    const std::size_t pixels = std::size_t(spec.width) * spec.height * spec.channels;
    t_seg = 0;
    std::size_t k = 0;
    for (const auto& seg : spec.camera) {
        Bytes px(pixels, seg.brightness);
        if (!seg.detections.empty()) {
            const Bytes block = encode_mock_detections(seg.detections);
            std::copy(block.begin(), block.end(), px.begin());
        }
        const Bytes frame = encode_image(spec.height, spec.width, spec.channels, px);
        const double t_end = t_seg + seg.duration_s;
        for (;; ++k) {
            const double t = double(k) / spec.camera_rate_hz;
            if (t >= t_end - 1e-12) break;
            records.push_back({cam_topic, static_cast<std::uint64_t>(seconds_to_nanos(t)), frame});
        }
        t_seg = t_end;
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const BagRecord& a, const BagRecord& b) { return a.timestamp_ns < b.timestamp_ns; });
    bag.records = std::move(records);
    return bag;
}

// --- Replay -------------------------------------------------------------------

ReplayReport replay(const Bag& bag, Transport& transport, const ReplayOptions& options, const std::atomic<bool>* stop,
                    const ReplayObserver& observer) {
    if (!(options.speed > 0)) throw Error(Errc::invalid_argument, "replay speed must be positive");
    bag.validate();
    ReplayReport report;
    const Nanos started = monotonic_now();
    if (bag.records.empty()) return report;

    std::vector<std::uint64_t> gaps;
    for (std::size_t i = 1; i < bag.records.size(); ++i)
        gaps.push_back(bag.records[i].timestamp_ns - bag.records[i - 1].timestamp_ns);
    std::uint64_t wrap_gap = 0;
    if (!gaps.empty()) {
        std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
        wrap_gap = gaps[gaps.size() / 2];
    }
    const std::uint64_t first = bag.records.front().timestamp_ns;
    const std::uint64_t span = bag.records.back().timestamp_ns - first;

    // After a stall the sender catches up by shortening gaps at most this
    // much, rather than bursting every overdue record at once.
    constexpr double kMaxCompression = 0.9;
    std::uint64_t pass_offset = 0;
    std::uint64_t prev_offset = 0;
    Nanos last_send = started;
    for (;;) {
        for (const auto& rec : bag.records) {
            if (stop && stop->load()) goto done;
            const std::uint64_t offset = pass_offset + (rec.timestamp_ns - first);
            const double gap = double(offset - prev_offset) / options.speed;
            prev_offset = offset;
            const Nanos scheduled = started + static_cast<Nanos>(double(offset) / options.speed);
            sleep_until_or_stop(std::max(scheduled, last_send + static_cast<Nanos>(gap * kMaxCompression)), stop);
            if (stop && stop->load()) goto done;
            const BagTopic& topic = bag.topics[rec.topic];
            last_send = monotonic_now();
            const Nanos source_ts = options.realign ? last_send : static_cast<Nanos>(rec.timestamp_ns);
            const PublishResult r = transport.publish(topic.name, ByteView(rec.payload), topic.content_type, source_ts);
            ++report.records_sent;
            if (observer) observer(rec, r, source_ts);
        }
        ++report.passes;
        if (!options.loop || (options.max_loops && report.passes >= options.max_loops)) break;
        pass_offset += span + wrap_gap;
    }
done:
    report.duration = monotonic_now() - started;
    return report;
}

// --- Measurement --------------------------------------------------------------

void PhasePlan::validate() const {
    if (!(warmup_s > 0) || phase_count == 0 || !(phase_length_s > 0))
        throw Error(Errc::invalid_argument, "phase plan values must be positive");
}

Nanos PhasePlan::total() const { return seconds_to_nanos(warmup_s + double(phase_count) * phase_length_s); }

std::optional<std::size_t> phase_of(Nanos offset, const PhasePlan& plan) {
    const Nanos warmup = seconds_to_nanos(plan.warmup_s);
    const Nanos length = seconds_to_nanos(plan.phase_length_s);
    if (offset < warmup) return std::nullopt;
    const auto k = static_cast<std::size_t>((offset - warmup) / length) + 1;
    if (k > plan.phase_count) return std::nullopt;
    return k;
}

Measurement measure(Transport& transport, const PhasePlan& plan, const std::function<void()>& on_start,
                    const std::atomic<bool>* stop) {
    plan.validate();
    Measurement m;
    m.plan = plan;
    m.phases.resize(plan.phase_count);
    auto sub = transport.subscribe(kRttTopic, QosProfile::keep_last(1 << 16));
    m.started = monotonic_now();
    if (on_start) on_start();
    const Nanos end = m.started + plan.total();
    for (;;) {
        const Nanos now = monotonic_now();
        if (now >= end || (stop && stop->load())) break;
        auto env = sub.pop(std::chrono::nanoseconds(std::min<Nanos>(end - now, 50'000'000)));
        if (!env) continue;
        const Nanos arrival = monotonic_now();
        const auto phase = phase_of(arrival - m.started, plan);
        if (!phase) {
            if (arrival - m.started < seconds_to_nanos(plan.warmup_s)) ++m.discarded_warmup;
            continue;
        }
        try {
            m.phases[*phase - 1].push_back({rtt_record_from_json(parse_json_bytes(env->bytes())), arrival, *phase});
        } catch (const std::exception&) {
            ++m.malformed;
        }
    }
    return m;
}

// --- Reporting ----------------------------------------------------------------

std::vector<CsvRow> rows_from(const Measurement& m, const std::string& implementation) {
    std::vector<CsvRow> rows;
    for (const auto& phase : m.phases)
        for (const auto& r : phase)
            rows.push_back({r.record.function, implementation, r.phase, r.record.t_in, r.record.t_out, r.record.rtt_ms()});
    return rows;
}

void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
    out << "function,implementation,phase,t_in_ns,t_out_ns,rtt_ms\n";
    for (const auto& r : rows) {
        for (const auto* field : {&r.function, &r.implementation})
            if (field->find_first_of(",\"\n\r") != std::string::npos)
                throw Error(Errc::invalid_argument, "CSV field contains a separator: " + *field);
        out << r.function << ',' << r.implementation << ',' << r.phase << ',' << r.t_in << ',' << r.t_out << ','
            << fmt("%.6f", r.rtt_ms) << '\n';
    }
    if (!out) throw Error(Errc::io_failure, "write failed: " + path.string());
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::malformed, path.string() + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "function,implementation,phase,t_in_ns,t_out_ns,rtt_ms")
        throw Error(Errc::malformed, path.string() + ": unexpected header");
    std::vector<CsvRow> rows;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw Error(Errc::malformed, path.string() + ":" + std::to_string(n) + ": expected 6 fields");
        try {
            rows.push_back({f[0], f[1], std::stoul(f[2]), std::stoll(f[3]), std::stoll(f[4]), std::stod(f[5])});
        } catch (const std::logic_error&) {
            throw Error(Errc::malformed, path.string() + ":" + std::to_string(n) + ": bad number");
        }
    }
    return rows;
}

std::vector<SummaryRow> summarize(const std::vector<CsvRow>& rows) {
    std::map<std::pair<std::string, std::string>, std::map<std::size_t, std::vector<double>>> groups;
    for (const auto& r : rows) groups[{r.function, r.implementation}][r.phase].push_back(r.rtt_ms);
    std::vector<SummaryRow> out;
    for (const auto& [key, phases] : groups) {
        std::vector<double> pooled;
        for (const auto& [phase, samples] : phases) {
            out.push_back({key.first, key.second, std::to_string(phase), stats(samples)});
            pooled.insert(pooled.end(), samples.begin(), samples.end());
        }
        out.push_back({key.first, key.second, "all", stats(pooled)});
    }
    return out;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %-14s %-5s %7s %10s %10s %10s %10s %10s\n", "Function", "Implementation",
                  "Phase", "N", "Min [ms]", "Max [ms]", "Mean [ms]", "MAD [ms]", "95th [ms]");
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-16s %-14s %-5s %7zu %10.3f %10.3f %10.3f %10.3f %10.3f\n", r.function.c_str(),
                      r.implementation.c_str(), r.phase.c_str(), r.stats.n, r.stats.min, r.stats.max, r.stats.mean,
                      r.stats.mad, r.stats.p95);
        out << buf;
    }
    return out.str();
}

std::string box_plot_svg(const std::vector<CsvRow>& rows) {
    if (rows.empty()) throw Error(Errc::empty_input, "nothing to plot");
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : rows) groups[r.function + "/" + r.implementation].push_back(std::max(r.rtt_ms, 1e-3));
    double lo = 1e300, hi = 0;
    for (auto& [label, v] : groups) {
        std::sort(v.begin(), v.end());
        lo = std::min(lo, v.front());
        hi = std::max(hi, v.back());
    }
    const double dec_lo = std::floor(std::log10(lo));
    double dec_hi = std::ceil(std::log10(hi));
    if (dec_hi <= dec_lo) dec_hi = dec_lo + 1;

    const double left = 70, top = 20, plot_h = 300, box_w = 40, spacing = 90;
    const double width = left + spacing * double(groups.size()) + 20, height = top + plot_h + 60;
    auto y_of = [&](double v) { return top + plot_h * (dec_hi - std::log10(v)) / (dec_hi - dec_lo); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (double d = dec_lo; d <= dec_hi; d += 1) {
        const double y = y_of(std::pow(10.0, d));
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << width - 10 << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt("%g", std::pow(10.0, d))
            << "</text>\n";
    }
    svg << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
        << ")\" text-anchor=\"middle\">RTT [ms] (log)</text>\n";
    std::size_t i = 0;
    for (const auto& [label, v] : groups) {
        const double cx = left + spacing * (double(i++) + 0.5);
        const double q1 = nearest_rank(v, 0.25), q3 = nearest_rank(v, 0.75), med = median(v);
        svg << "<line x1=\"" << cx << "\" y1=\"" << y_of(v.front()) << "\" x2=\"" << cx << "\" y2=\"" << y_of(v.back())
            << "\" stroke=\"black\"/>\n";
        svg << "<rect x=\"" << cx - box_w / 2 << "\" y=\"" << y_of(q3) << "\" width=\"" << box_w << "\" height=\""
            << std::max(1.0, y_of(q1) - y_of(q3)) << "\" fill=\"#9cc3e6\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << cx - box_w / 2 << "\" y1=\"" << y_of(med) << "\" x2=\"" << cx + box_w / 2 << "\" y2=\""
            << y_of(med) << "\" stroke=\"#c00\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 20 << "\" text-anchor=\"middle\">" << label
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_box_plot(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
    const std::string svg = box_plot_svg(rows);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
    out << svg;
    if (!out) throw Error(Errc::io_failure, "write failed: " + path.string());
}

// --- Calibration --------------------------------------------------------------

Calibration calibrate(const Bag& bag, const std::string& imu_topic, const functions::RoughnessConfig& cfg,
                      std::size_t stride) {
    cfg.validate();
    if (stride == 0) throw Error(Errc::invalid_argument, "stride must be positive");
    std::vector<double> z;
    for (const auto& r : bag.records)
        if (bag.topics[r.topic].name == imu_topic) z.push_back(decode_imu(r.payload).accel[2]);
    if (z.size() < cfg.window_size)
        throw Error(Errc::empty_input, "fewer IMU samples than one window on " + imu_topic);
    std::vector<double> scores;
    for (std::size_t end = cfg.window_size; end <= z.size(); end += stride)
        scores.push_back(functions::roughness_score_signal(
            std::span<const double>(z).subspan(end - cfg.window_size, cfg.window_size), cfg));
    std::sort(scores.begin(), scores.end());
    Calibration c;
    c.windows = scores.size();
    c.low_score = nearest_rank(scores, 0.10);
    c.high_score = nearest_rank(scores, 0.90);
    c.start_threshold = c.low_score > 0 ? std::sqrt(c.low_score * c.high_score) : c.high_score / 2;
    c.stop_threshold = 0.8 * c.start_threshold;
    return c;
}

// --- end-to-end run ----------------------------------------------------------

BenchRunResult run_bench(const Bag& bag, const BenchRunConfig& config, const std::atomic<bool>* stop) {
    config.plan.validate();
    if (config.manifests.empty()) throw Error(Errc::invalid_argument, "bench run needs at least one manifest");
    bag.validate();

    auto bus = std::make_shared<LocalTransport>();
    HostOptions hopts;
    hopts.instrument_rtt = true;
    hopts.backend = config.backend;
    hopts.sink = std::make_shared<MemorySink>();
    std::vector<std::unique_ptr<Host>> hosts;
    for (const auto& m : config.manifests) hosts.push_back(Host::load(m, bus, hopts));

    std::vector<std::thread> host_threads;
    std::vector<std::exception_ptr> host_errors(hosts.size());
    for (std::size_t i = 0; i < hosts.size(); ++i)
        host_threads.emplace_back([&, i] {
            try {
                hosts[i]->run();
            } catch (...) {
                host_errors[i] = std::current_exception();
            }
        });

    std::atomic<bool> replay_stop{false};
    BenchRunResult result;
    std::thread replayer;
    auto stop_all = [&] {
        replay_stop = true;
        if (replayer.joinable()) replayer.join();
        for (auto& h : hosts) h->stop();
        for (auto& t : host_threads) t.join();
    };
    try {
        result.measurement = measure(
            *bus, config.plan,
            [&] {
                replayer = std::thread([&] { result.replay = replay(bag, *bus, config.replay, &replay_stop); });
            },
            stop);
    } catch (...) {
        stop_all();
        throw;
    }
    for (const auto& h : hosts) result.hosts.push_back(h->status());
    stop_all();
    for (const auto& err : host_errors)
        if (err) std::rethrow_exception(err);
    result.rows = rows_from(result.measurement, config.implementation);
    return result;
}

} // namespace edgefn::bench
