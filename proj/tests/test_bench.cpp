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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "edgefn/bench.hpp"
#include "edgefn/error.hpp"
#include "oracles.hpp"

using namespace edgefn;
using namespace edgefn::bench;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("edgefn-bench-" + std::to_string(::getpid()) + "-" +
                                            std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool close_rel(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

} // namespace

TEST_CASE("stats worked examples") {
    const auto s = stats(std::vector<double>{1, 2, 3, 4, 100});
    CHECK(s.n == 5);
    CHECK(s.min == 1);
    CHECK(s.max == 100);
    CHECK(s.mean == 22);
    CHECK(s.mad == 1);
    CHECK(s.p95 == 100);

    const auto one = stats(std::vector<double>{5});
    CHECK(one.min == 5);
    CHECK(one.max == 5);
    CHECK(one.mean == 5);
    CHECK(one.mad == 0);
    CHECK(one.p95 == 5);

    CHECK(stats(std::vector<double>(17, 3.25)).mad == 0);
    CHECK(median(std::vector<double>{4, 1, 3, 2}) == 2.5);
    CHECK_THROWS_AS(stats(std::vector<double>{}), Error);
}

TEST_CASE("stats agree with the sort-based oracle") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 50);
    for (std::size_t n : {1u, 2u, 3u, 19u, 20u, 21u, 1000u}) {
        std::vector<double> v(n);
        for (auto& x : v) x = u(rng);
        const auto got = stats(v);
        const auto want = oracle::summarize(v);
        CHECK(close_rel(got.min, want.min, 1e-9));
        CHECK(close_rel(got.max, want.max, 1e-9));
        CHECK(close_rel(got.mean, want.mean, 1e-9));
        CHECK(close_rel(got.mad, want.mad, 1e-9));
        CHECK(close_rel(got.p95, want.p95, 1e-9));
        CHECK(got.min <= got.p95);
        CHECK(got.p95 <= got.max);
    }
}

TEST_CASE("mann-whitney exact examples") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const auto r = mwu(a, b);
    CHECK(r.method == MwuMethod::exact);
    CHECK(r.u == 0);
    CHECK(r.p_two_sided == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(oracle::exhaustive_mwu_p(a, b)).epsilon(1e-12));

    const std::vector<double> same{3, 1, 2, 2};
    CHECK(mwu(same, same).p_two_sided >= 0.99);
    CHECK_THROWS_AS(mwu(std::vector<double>{}, b), Error);
}

TEST_CASE("exact p matches exhaustive enumeration, ties included") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t na = 1 + rng() % 6, nb = 1 + rng() % 6;
        std::vector<double> a(na), b(nb);
        // Small integer range forces ties.
        for (auto& x : a) x = double(rng() % 5);
        for (auto& x : b) x = double(rng() % 5);
        const auto r = mwu_exact(a, b);
        CHECK(r.p_two_sided == doctest::Approx(oracle::exhaustive_mwu_p(a, b)).epsilon(1e-12));
        const double ua = oracle::u_statistic(a, b);
        CHECK(r.u == std::min(ua, double(na * nb) - ua));
    }
}

TEST_CASE("normal approximation tracks the exact test on tie-free 10+10 samples") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> g(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(10), b(10);
        const double shift = double(trial % 5) * 0.4;
        for (auto& x : a) x = g(rng);
        for (auto& x : b) x = g(rng) + shift;
        worst = std::max(worst, std::fabs(mwu_exact(a, b).p_two_sided - mwu_normal(a, b).p_two_sided));
    }
    CHECK(worst <= 0.02);
}

TEST_CASE("large shifted samples are highly significant") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> a(500), b(500);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng) + 10;
    const auto r = mwu(a, b);
    CHECK(r.method == MwuMethod::normal_approx);
    CHECK(r.p_two_sided < 0.001);
    CHECK(r.u == 0);
}

TEST_CASE("bag round trip and layout") {
    Bag bag;
    const auto t = bag.topic_index("/x", ContentType::raw_bytes);
    bag.records.push_back({t, 5, Bytes{1, 2}});
    bag.records.push_back({t, 7, Bytes{}});
    const Bytes data = encode_bag(bag);
    const Bytes prefix = {'J', 'B', 'L', 'B', 1, 0, 1, 0, 0, 0, 2, 0, '/', 'x', 0, 2, 0, '{', '}'};
    REQUIRE(data.size() > prefix.size());
    CHECK(Bytes(data.begin(), data.begin() + prefix.size()) == prefix);
    const Bag back = decode_bag(data);
    REQUIRE(back.records.size() == 2);
    CHECK(back.topics[0].name == "/x");
    CHECK(back.records[0].payload == Bytes{1, 2});
    CHECK(back.records[1].timestamp_ns == 7);
}

TEST_CASE("malformed bags name the offending offset") {
    Bag bag;
    const auto t = bag.topic_index("/x", ContentType::raw_bytes);
    bag.records.push_back({t, 5, Bytes{1, 2}});
    Bytes data = encode_bag(bag);
    const std::size_t record_at = 4 + 2 + 4 + 2 + 2 + 1 + 2 + 2;

    Bytes bad_index = data;
    bad_index[record_at] = 9;
    try {
        decode_bag(bad_index);
        FAIL("expected malformed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed);
        CHECK(std::string(e.what()).find("offset " + std::to_string(record_at)) != std::string::npos);
    }

    Bytes truncated(data.begin(), data.end() - 1);
    try {
        decode_bag(truncated);
        FAIL("expected malformed");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("offset " + std::to_string(record_at + 16)) != std::string::npos);
    }

    Bytes bad_magic = data;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_bag(bad_magic), Error);

    bag.records.push_back({t, 1, Bytes{}});
    CHECK_THROWS_AS(encode_bag(bag), Error);
}

TEST_CASE("synth bags follow their segments and are deterministic") {
    SynthSpec spec;
    spec.imu = {{10, ImuProfile::smooth, 0, {}, {}, {}}};
    spec.camera = {{2, 30, {}}};
    const Bag bag = synth_bag(spec);
    CHECK(bag.count(0) == 1000);
    CHECK(bag.count(1) == 20);
    for (const auto& r : bag.records)
        if (r.topic == 1) CHECK(functions::mean_luminance(decode_image(r.payload)) < 50.0 / 255.0);
    CHECK(encode_bag(synth_bag(spec)) == encode_bag(bag));
    spec.seed = 2;
    CHECK(encode_bag(synth_bag(spec)) != encode_bag(bag));
    CHECK_NOTHROW(bag.validate());
}

TEST_CASE("synth spec JSON round trip") {
    const auto spec = default_synth_spec();
    const auto back = synth_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
    CHECK(encode_bag(synth_bag(back)) == encode_bag(synth_bag(spec)));
    CHECK_THROWS_AS(synth_spec_from_json(nlohmann::json{{"imu", {{"rate_hz", 0}, {"segments", nlohmann::json::array()}}}}),
                    Error);
}

TEST_CASE("replay preserves gaps, scales with speed and realigns timestamps") {
    Bag bag;
    const auto t = bag.topic_index("/r", ContentType::raw_bytes);
    for (std::uint64_t ms : {0, 100, 300}) bag.records.push_back({t, ms * 1'000'000, Bytes{1}});

    for (double speed : {1.0, 2.0}) {
        LocalTransport bus;
        auto sub = bus.subscribe("/r", QosProfile::keep_last(10));
        const Nanos before = monotonic_now();
        const auto report = replay(bag, bus, {speed, true, false, 0});
        const Nanos after = monotonic_now();
        CHECK(report.records_sent == 3);
        auto got = sub.drain();
        REQUIRE(got.size() == 3);
        const double g1 = to_millis(got[1].source_ts - got[0].source_ts);
        const double g2 = to_millis(got[2].source_ts - got[1].source_ts);
        CHECK(g1 == doctest::Approx(100.0 / speed).epsilon(0.1));
        CHECK(g2 == doctest::Approx(200.0 / speed).epsilon(0.1));
        for (const auto& e : got) {
            CHECK(e.source_ts >= before);
            CHECK(e.source_ts <= after);
        }
    }
}

TEST_CASE("replay recovers from a stall without bursting") {
    Bag bag;
    const auto t = bag.topic_index("/r", ContentType::raw_bytes);
    for (std::uint64_t i = 0; i < 40; ++i) bag.records.push_back({t, i * 10'000'000, Bytes{1}});

    // Blocks once for several record periods, like a descheduled sender.
    struct StallingBus final : Transport {
        LocalTransport inner;
        int calls = 0;
        using Transport::publish;
        PublishResult publish(std::string_view topic, Payload p, ContentType type, Nanos ts) override {
            if (++calls == 5) std::this_thread::sleep_for(35ms);
            return inner.publish(topic, std::move(p), type, ts);
        }
        Subscription subscribe(std::string_view topic, QosProfile q) override { return inner.subscribe(topic, q); }
        void shutdown() override { inner.shutdown(); }
        bool is_shut_down() const override { return inner.is_shut_down(); }
    } bus;
    auto sub = bus.subscribe("/r", QosProfile::keep_last(64));
    const auto report = replay(bag, bus, {1.0, true, false, 0});
    auto got = sub.drain();
    REQUIRE(got.size() == 40);
    double min_gap = 1e9;
    for (std::size_t i = 1; i < got.size(); ++i) min_gap = std::min(min_gap, to_millis(got[i].source_ts - got[i - 1].source_ts));
    CHECK(min_gap >= 8.9);
    // The shortened gaps absorb the stall before the bag ends.
    CHECK(to_millis(report.duration) < 390 + 15);
}

TEST_CASE("replay without realignment passes bag timestamps through") {
    Bag bag;
    const auto t = bag.topic_index("/r", ContentType::raw_bytes);
    bag.records.push_back({t, 1000, Bytes{1}});
    bag.records.push_back({t, 2000, Bytes{2}});
    LocalTransport bus;
    auto sub = bus.subscribe("/r", QosProfile::keep_last(10));
    replay(bag, bus, {1.0, false, false, 0});
    auto got = sub.drain();
    REQUIRE(got.size() == 2);
    CHECK(got[0].source_ts == 1000);
    CHECK(got[1].source_ts == 2000);
}

TEST_CASE("looping replay wraps after the median gap") {
    Bag bag;
    const auto t = bag.topic_index("/r", ContentType::raw_bytes);
    for (std::uint64_t ms : {0, 20, 40, 100}) bag.records.push_back({t, ms * 1'000'000, Bytes{1}});
    LocalTransport bus;
    auto sub = bus.subscribe("/r", QosProfile::keep_last(20));
    const auto report = replay(bag, bus, {1.0, true, true, 2});
    CHECK(report.passes == 2);
    CHECK(report.records_sent == 8);
    auto got = sub.drain();
    REQUIRE(got.size() == 8);
    // Gaps are 20, 20, 60; the median is 20 ms.
    CHECK(to_millis(got[4].source_ts - got[3].source_ts) == doctest::Approx(20.0).epsilon(0.25));
}

TEST_CASE("phase binning") {
    PhasePlan plan;
    CHECK_FALSE(phase_of(19'000'000'000, plan));
    CHECK(phase_of(25'000'000'000, plan) == 1u);
    CHECK(phase_of(40'000'000'000, plan) == 2u);
    CHECK(phase_of(79'999'999'999, plan) == 3u);
    CHECK_FALSE(phase_of(80'000'000'000, plan));
    PhasePlan bad;
    bad.phase_count = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("measure excludes warm-up and bins by arrival") {
    LocalTransport bus;
    PhasePlan plan{0.2, 3, 0.2};
    std::atomic<bool> stop{false};
    std::thread emitter;
    const auto m = measure(bus, plan, [&] {
        emitter = std::thread([&] {
            std::uint64_t seq = 0;
            while (!stop.load()) {
                const Nanos now = monotonic_now();
                bus.publish(kRttTopic, json_bytes(to_json(RttRecord{"f", ++seq, now - 1'000'000, now})),
                            ContentType::rtt_record, now);
                std::this_thread::sleep_for(10ms);
            }
        });
    });
    stop = true;
    emitter.join();
    CHECK(m.discarded_warmup > 5);
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(m.phases[p].size() >= 8);
        CHECK(m.phases[p].size() <= 22);
        for (const auto& r : m.phases[p]) {
            CHECK(r.phase == p + 1);
            CHECK(r.arrival - m.started >= 200'000'000);
            CHECK(r.record.rtt_ms() == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("csv, summary and plot") {
    TempDir dir;
    std::vector<CsvRow> rows;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.5, 40);
    for (const char* impl : {"native", "other"})
        for (int i = 0; i < 100; ++i) {
            const double ms = u(rng);
            rows.push_back({"imu_fft", impl, std::size_t(1 + i % 3), 1000, 1000 + Nanos(ms * 1e6), ms});
        }
    write_csv(dir.path / "r.csv", rows);
    std::ifstream in(dir.path / "r.csv");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 201);

    const auto back = read_csv(dir.path / "r.csv");
    REQUIRE(back.size() == 200);
    CHECK(back[5].implementation == "native");
    CHECK(back[5].rtt_ms == doctest::Approx(rows[5].rtt_ms).epsilon(1e-6));

    const auto summary = summarize(back);
    CHECK(summary.size() == 8);
    std::vector<double> native;
    for (const auto& r : back)
        if (r.implementation == "native") native.push_back(r.rtt_ms);
    const auto pooled = std::find_if(summary.begin(), summary.end(), [](const SummaryRow& s) {
        return s.implementation == "native" && s.phase == "all";
    });
    REQUIRE(pooled != summary.end());
    CHECK(pooled->stats.mean == stats(native).mean);
    CHECK(pooled->stats.p95 == stats(native).p95);
    CHECK(format_summary(summary).find("95th [ms]") != std::string::npos);

    write_box_plot(dir.path / "p.svg", back);
    CHECK(fs::file_size(dir.path / "p.svg") > 0);
    const std::string svg = box_plot_svg(back);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("imu_fft/native") != std::string::npos);

    std::ofstream(dir.path / "bad.csv") << "a,b\n";
    CHECK_THROWS_AS(read_csv(dir.path / "bad.csv"), Error);
}

TEST_CASE("calibration separates smooth from rough windows") {
    const Bag bag = synth_bag(default_synth_spec());
    functions::RoughnessConfig cfg;
    const auto c = calibrate(bag, "/sensors/imu", cfg, 8);
    CHECK(c.windows > 100);
    CHECK(c.low_score < c.start_threshold);
    CHECK(c.start_threshold < c.high_score);
    CHECK(c.stop_threshold == doctest::Approx(0.8 * c.start_threshold));
    CHECK_THROWS_AS(calibrate(bag, "/nope", cfg), Error);
}

TEST_CASE("JSON-lines import") {
    TempDir dir;
    std::ofstream(dir.path / "a.bin", std::ios::binary) << "AAAA";
    std::ofstream(dir.path / "b.bin", std::ios::binary) << "BB";
    {
        std::ofstream idx(dir.path / "index.jsonl");
        idx << R"({"topic": "/cam", "content_type": "image_frame", "timestamp_ns": 20, "file": "a.bin", "metadata": {"width": 2}})"
            << "\n\n"
            << R"({"topic": "/raw", "content_type": "raw_bytes", "timestamp_ns": 10, "file": "b.bin"})" << "\n";
    }
    const Bag bag = import_jsonl(dir.path / "index.jsonl");
    REQUIRE(bag.records.size() == 2);
    CHECK(bag.records[0].timestamp_ns == 10);
    CHECK(bag.records[0].payload == Bytes{'B', 'B'});
    CHECK(bag.topics[bag.records[1].topic].metadata["width"] == 2);
    CHECK(bag.topics[bag.records[1].topic].content_type == ContentType::image_frame);

    std::ofstream(dir.path / "broken.jsonl") << "{not json\n";
    CHECK_THROWS_AS(import_jsonl(dir.path / "broken.jsonl"), Error);
}

TEST_CASE("run_bench hosts lambdas in-process and reports per phase") {
    SynthSpec spec;
    spec.imu_rate_hz = 50;
    spec.imu = {{1.0, ImuProfile::smooth, 0, {}, {}, {}}};
    spec.camera = {};
    const Bag bag = synth_bag(spec);

    FunctionManifest m;
    m.name = "echo_rtt";
    m.mode = ScheduleMode::event;
    m.trigger_topic = spec.imu_topic;
    m.subscriptions.push_back({spec.imu_topic, ChannelClass::low_volume, 16, QosProfile::keep_last(64)});
    m.entry_ref = "echo";

    BenchRunConfig cfg;
    cfg.manifests = {m};
    cfg.plan = PhasePlan{0.2, 2, 0.4};
    const auto res = run_bench(bag, cfg);
    REQUIRE(res.hosts.size() == 1);
    CHECK(res.hosts[0].invocations > 0);
    CHECK(res.replay.passes >= 1);
    CHECK(res.measurement.discarded_warmup > 0);
    std::set<std::size_t> phases;
    for (const auto& r : res.rows) {
        phases.insert(r.phase);
        CHECK(r.function == "echo_rtt");
        CHECK(r.implementation == "edgefn");
        CHECK(r.t_out >= r.t_in);
    }
    CHECK(phases == std::set<std::size_t>{1, 2});
    // Roughly 50 Hz for 0.8 s of phases.
    CHECK(res.rows.size() >= 25);
    CHECK(res.rows.size() <= 45);
}
