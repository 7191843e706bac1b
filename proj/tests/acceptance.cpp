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

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails. Arguments select a subset, e.g. `acceptance 3 9`.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <cstring>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <csignal>

#include "edgefn/bag.hpp"
#include "edgefn/bench.hpp"
#include "edgefn/control.hpp"
#include "edgefn/crypto.hpp"
#include "edgefn/error.hpp"
#include "edgefn/functions.hpp"
#include "edgefn/host.hpp"
#include "edgefn/ingress.hpp"
#include "edgefn/manifest.hpp"
#include "edgefn/orchestrator.hpp"
#include "edgefn/payloads.hpp"
#include "edgefn/registry.hpp"
#include "edgefn/stats.hpp"
#include "edgefn/transport.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace edgefn;
using namespace std::chrono_literals;
using edgefn::test::eventually;
using edgefn::test::TempDir;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failed checks; the first few end up in the report line.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) notes_.push_back(what);
    }
    void note(const std::string& what) { info_.push_back(what); }
    Outcome outcome() const {
        std::string text;
        for (const auto& n : failures_ ? notes_ : info_) text += (text.empty() ? "" : "; ") + n;
        if (failures_ > 3) text += "; +" + std::to_string(failures_ - 3) + " more";
        return {failures_ == 0, text};
    }

private:
    std::size_t failures_ = 0;
    std::vector<std::string> notes_;
    std::vector<std::string> info_;
};

std::string fmt(double v, int precision = 3) {
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << v;
    return os.str();
}

bool close_rel(double got, double want, double tol) {
    return std::fabs(got - want) <= tol * std::max(1.0, std::fabs(want));
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint32_t topic_of(const Bag& bag, const std::string& name) {
    for (std::uint32_t i = 0; i < bag.topics.size(); ++i)
        if (bag.topics[i].name == name) return i;
    throw Error(Errc::unknown_topic, name);
}

FunctionManifest test_manifest(const std::string& file) {
    return load_manifest(std::filesystem::path(EDGEFN_TEST_DATA) / "manifests" / file);
}

// ---------------------------------------------------------------------------

Outcome stats_oracle() {
    Checker c;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-50.0, 250.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> xs(1000);
        for (auto& x : xs) x = u(rng);
        const auto got = stats(xs);
        const auto want = oracle::summarize(xs);
        c.expect(got.n == 1000, "n");
        c.expect(close_rel(got.min, want.min, 1e-9), "min");
        c.expect(close_rel(got.max, want.max, 1e-9), "max");
        c.expect(close_rel(got.mean, want.mean, 1e-9), "mean " + fmt(got.mean, 12) + " vs " + fmt(want.mean, 12));
        c.expect(close_rel(got.mad, want.mad, 1e-9), "mad");
        c.expect(close_rel(got.p95, want.p95, 1e-9), "p95");
    }
    const std::vector<double> worked{1, 2, 3, 4, 100};
    const auto w = stats(worked);
    c.expect(w.min == 1 && w.max == 100 && w.mean == 22 && w.mad == 1 && w.p95 == 100,
             "worked example gave (" + fmt(w.min) + ", " + fmt(w.max) + ", " + fmt(w.mean) + ", " + fmt(w.mad) +
                 ", " + fmt(w.p95) + ")");
    c.note("5 x 1000 samples within 1e-9; worked example (1, 100, 22, 1, 100)");
    return c.outcome();
}

Outcome mwu_oracle() {
    Checker c;
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    const auto r = mwu(a, b);
    c.expect(r.method == MwuMethod::exact, "small samples should use the exact method");
    c.expect(r.u == 0, "U=" + fmt(r.u));
    c.expect(std::fabs(r.p_two_sided - 0.1) < 1e-12, "p=" + fmt(r.p_two_sided, 6));
    c.expect(std::fabs(r.p_two_sided - oracle::exhaustive_mwu_p(a, b)) < 1e-12, "exhaustive oracle disagrees");

    std::mt19937_64 rng(202);
    std::normal_distribution<double> noise(0.0, 1.0);
    // Exact p against full enumeration on smaller samples, some with ties.
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> xa(6), xb(6);
        for (auto& x : xa) x = std::round(noise(rng) * 2);
        for (auto& x : xb) x = std::round(noise(rng) * 2 + 1);
        const auto got = mwu_exact(xa, xb);
        c.expect(std::fabs(got.p_two_sided - oracle::exhaustive_mwu_p(xa, xb)) < 1e-9, "exact p vs enumeration");
        c.expect(got.u == std::min(oracle::u_statistic(xa, xb), oracle::u_statistic(xb, xa)), "U vs pair count");
    }
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        // Distinct values drawn without replacement keep the samples tie-free.
        std::vector<double> pool(20);
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = double(i) + (trial % 7) * 0.5 * double(i >= 10);
        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<double> xa(pool.begin(), pool.begin() + 10), xb(pool.begin() + 10, pool.end());
        const double d = std::fabs(mwu_exact(xa, xb).p_two_sided - mwu_normal(xa, xb).p_two_sided);
        worst = std::max(worst, d);
    }
    c.expect(worst <= 0.02, "max |exact - normal| = " + fmt(worst, 4));
    c.note("U=0 p=0.1; max |exact - normal| over 100 cases " + fmt(worst, 4));
    return c.outcome();
}

Outcome fft_oracle() {
    Checker c;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0, worst_parseval = 0;
    for (std::size_t n = 2; n <= 1024; n *= 2) {
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> x(n);
            for (auto& v : x) v = u(rng);
            const auto got = functions::fft(x);
            const auto want = oracle::direct_dft(x);
            if (got.size() != n) {
                c.expect(false, "fft size for n=" + std::to_string(n));
                continue;
            }
            double diff = 0, scale = 0, time_energy = 0, freq_energy = 0;
            for (std::size_t k = 0; k < n; ++k) {
                diff = std::max(diff, std::abs(got[k] - want[k]));
                scale = std::max(scale, std::abs(want[k]));
                freq_energy += std::norm(got[k]);
                time_energy += x[k] * x[k];
            }
            const double rel = diff / std::max(scale, 1e-300);
            const double parseval = std::fabs(freq_energy / double(n) - time_energy) / time_energy;
            worst = std::max(worst, rel);
            worst_parseval = std::max(worst_parseval, parseval);
        }
    }
    c.expect(worst <= 1e-9, "max relative error " + std::to_string(worst));
    c.expect(worst_parseval <= 1e-6, "Parseval error " + std::to_string(worst_parseval));
    std::ostringstream os;
    os << "N=2..1024 x 50; max rel err " << std::scientific << std::setprecision(2) << worst << ", Parseval "
       << worst_parseval;
    c.note(os.str());
    return c.outcome();
}

Outcome nms_oracle() {
    Checker c;
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<float> pos(0.0f, 60.0f), size(10.0f, 60.0f);
    std::uniform_int_distribution<int> cls(0, 2), conf_step(1, 20);
    std::size_t kept_total = 0;
    for (int instance = 0; instance < 1000; ++instance) {
        std::vector<Detection> dets;
        std::vector<oracle::Box> boxes;
        for (int i = 0; i < 50; ++i) {
            const float x1 = pos(rng), y1 = pos(rng);
            // Coarse confidences make ties common so the ordering rule matters.
            const Detection d{x1, y1, x1 + size(rng), y1 + size(rng), std::uint32_t(cls(rng)),
                              float(conf_step(rng)) * 0.05f};
            dets.push_back(d);
            boxes.push_back({d.x1, d.y1, d.x2, d.y2, d.class_id, d.confidence});
        }
        const auto got = functions::nms(dets, 0.45);
        const auto want = oracle::greedy_nms(boxes, 0.45);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i)
            same = got[i].x1 == want[i].x1 && got[i].y1 == want[i].y1 && got[i].x2 == want[i].x2 &&
                   got[i].y2 == want[i].y2 && got[i].class_id == want[i].cls && got[i].confidence == want[i].conf;
        c.expect(same, "instance " + std::to_string(instance) + " differs");
        kept_total += want.size();
    }
    c.note("1000 x 50 boxes identical, " + std::to_string(kept_total) + " kept in total");
    return c.outcome();
}

Outcome ingress_stress() {
    Checker c;
    constexpr std::uint64_t kPerProducer = 100'000;
    auto transport = std::make_shared<LocalTransport>();
    IngressHub hub;
    const std::vector<std::string> rings{"/stress/a", "/stress/b", "/stress/c"};
    const std::string frames = "/stress/frames";
    for (const auto& t : rings)
        hub.attach(transport->subscribe(t, QosProfile::keep_last(1024)), ChannelClass::low_volume, 256,
                   IngressDefaults::slot_size, 64);
    hub.attach(transport->subscribe(frames, QosProfile::keep_last(64)), ChannelClass::high_volume, 8, 256);
    const auto pool = hub.pool(frames);

    std::atomic<bool> producing{true};
    std::atomic<std::uint64_t> order_violations{0}, payload_mismatch{0}, samples{0}, invariant_breaks{0};

    std::vector<std::thread> threads;
    // Ring readers: every window must be strictly increasing and carry the
    // producer counter that matches its transport seq.
    for (const auto& t : rings) {
        threads.emplace_back([&, t] {
            std::uint64_t last_latest = 0;
            while (producing.load()) {
                const auto w = hub.window(t, 64);
                for (std::size_t i = 0; i < w.size(); ++i) {
                    if (i > 0 && w[i].seq <= w[i - 1].seq) ++order_violations;
                    std::uint64_t counter = 0;
                    std::memcpy(&counter, w[i].payload.data(), sizeof counter);
                    if (counter + 1 != w[i].seq) ++payload_mismatch;
                }
                if (!w.empty()) {
                    if (w.back().seq < last_latest) ++order_violations;
                    last_latest = w.back().seq;
                }
                std::this_thread::yield();
            }
        });
    }
    // Frame reader holds up to eight leases, enough to exhaust the pool.
    threads.emplace_back([&] {
        std::deque<SlotLease> held;
        std::uint64_t last_seq = 0;
        while (producing.load()) {
            if (auto item = hub.latest(frames)) {
                auto& lease = std::get<SlotLease>(*item);
                if (lease.seq() < last_seq) ++order_violations;
                last_seq = lease.seq();
                std::uint64_t counter = 0;
                std::memcpy(&counter, lease.data().data(), sizeof counter);
                if (counter + 1 != lease.seq()) ++payload_mismatch;
                held.push_back(std::move(lease));
                if (held.size() > 8) held.pop_front();
            }
            std::this_thread::sleep_for(50us);
        }
    });
    threads.emplace_back([&] {
        while (producing.load()) {
            const auto pc = pool->counters();
            ++samples;
            if (pc.frames_ingested != pc.leases_granted_for_new_frames + pc.drop_count) ++invariant_breaks;
            std::this_thread::sleep_for(100us);
        }
    });

    std::vector<std::thread> producers;
    for (const auto& t : rings) producers.emplace_back([&, t] {
        for (std::uint64_t i = 0; i < kPerProducer; ++i) {
            Bytes payload(16, 0);
            std::memcpy(payload.data(), &i, sizeof i);
            transport->publish(t, ByteView(payload), ContentType::raw_bytes, Nanos(i));
        }
    });
    producers.emplace_back([&] {
        for (std::uint64_t i = 0; i < kPerProducer; ++i) {
            Bytes payload(128, 0xAB);
            std::memcpy(payload.data(), &i, sizeof i);
            transport->publish(frames, ByteView(payload), ContentType::image_frame, Nanos(i));
        }
    });
    for (auto& p : producers) p.join();

    auto settled = [&] {
        for (const auto& ch : hub.counters())
            if (ch.arrivals + ch.transport_dropped != kPerProducer) return false;
        return true;
    };
    c.expect(eventually(settled, 20s), "receivers did not account for every message");
    producing = false;
    for (auto& t : threads) t.join();

    std::uint64_t stored = 0, dropped = 0;
    for (const auto& ch : hub.counters()) {
        c.expect(ch.arrivals + ch.transport_dropped == kPerProducer,
                 ch.topic + ": consumed + dropped = " + std::to_string(ch.arrivals + ch.transport_dropped));
        stored += ch.arrivals - ch.dropped;
        dropped += ch.dropped + ch.transport_dropped;
    }
    for (const auto& t : rings) {
        auto latest = hub.latest(t);
        c.expect(latest && std::get<RingRecord>(*latest).seq == kPerProducer, t + ": newest record missing");
    }
    const auto pc = pool->counters();
    const auto frame_counts = [&] {
        for (const auto& ch : hub.counters())
            if (ch.topic == frames) return ch;
        return ChannelCounters{};
    }();
    c.expect(pc.frames_ingested == frame_counts.arrivals, "pool ingested != channel arrivals");
    c.expect(pc.drop_count == frame_counts.dropped, "pool drops != channel drops");
    c.expect(pc.drop_count > 0, "stress never exhausted the pool");
    c.expect(pc.frames_ingested == pc.leases_granted_for_new_frames + pc.drop_count, "final pool invariant");
    c.expect(order_violations == 0, std::to_string(order_violations.load()) + " seq order violations");
    c.expect(payload_mismatch == 0, std::to_string(payload_mismatch.load()) + " payload/seq mismatches");
    c.expect(invariant_breaks == 0, std::to_string(invariant_breaks.load()) + " pool invariant breaks");
    c.expect(samples >= 100, "only " + std::to_string(samples.load()) + " pool samples");
    hub.stop();
    c.note("4 x 100000: stored " + std::to_string(stored) + ", dropped " + std::to_string(dropped) + ", " +
           std::to_string(samples.load()) + " pool samples, " + std::to_string(pc.drop_count) + " pool drops");
    return c.outcome();
}

FunctionManifest echo_on(const std::string& name, const std::string& topic, double delay_ms) {
    FunctionManifest m = test_manifest("echo.json");
    m.name = name;
    m.trigger_topic = topic;
    m.subscriptions.at(0).topic = topic;
    m.params["delay_ms"] = fmt(delay_ms, 1);
    return m;
}

struct RunningHost {
    std::unique_ptr<Host> host;
    std::thread thread;
    std::string error;

    RunningHost(const FunctionManifest& m, std::shared_ptr<Transport> transport) {
        HostOptions o;
        o.sink = std::make_shared<MemorySink>();
        host = Host::load(m, std::move(transport), o);
        thread = std::thread([this] {
            try {
                host->run();
            } catch (const std::exception& e) {
                error = e.what();
            }
        });
    }
    ~RunningHost() {
        host->stop();
        thread.join();
    }
};

// Publishes `count` triggers at `rate_hz` and waits for the host to settle.
HostStatus drive_triggers(RunningHost& rh, Transport& transport, const std::string& topic, std::size_t count,
                          double rate_hz) {
    const auto period = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / rate_hz));
    auto next = Clock::now();
    for (std::size_t i = 0; i < count; ++i) {
        std::this_thread::sleep_until(next);
        const auto sample = encode_imu(ImuSample{monotonic_now(), {0, 0, 9.81}, {}});
        transport.publish(topic, ByteView(sample), ContentType::imu_sample, monotonic_now());
        next += period;
    }
    eventually(
        [&] {
            const auto s = rh.host->status();
            return s.trigger_arrivals == count && s.invocations + s.coalesced == s.trigger_arrivals;
        },
        5s);
    return rh.host->status();
}

Outcome event_exactness() {
    Checker c;
    auto transport = std::make_shared<LocalTransport>();
    HostStatus fast, slow;
    {
        RunningHost rh(echo_on("echo_fast", "/trig/fast", 0), transport);
        fast = drive_triggers(rh, *transport, "/trig/fast", 1000, 100);
        c.expect(rh.error.empty(), rh.error);
    }
    c.expect(fast.trigger_arrivals == 1000, "fast: delivered " + std::to_string(fast.trigger_arrivals));
    c.expect(fast.invocations == fast.trigger_arrivals,
             "fast: invocations " + std::to_string(fast.invocations) + " != delivered");
    c.expect(fast.coalesced == 0, "fast: coalesced " + std::to_string(fast.coalesced));
    {
        RunningHost rh(echo_on("echo_slow", "/trig/slow", 25), transport);
        slow = drive_triggers(rh, *transport, "/trig/slow", 300, 100);
        c.expect(rh.error.empty(), rh.error);
    }
    c.expect(slow.trigger_arrivals == 300, "slow: delivered " + std::to_string(slow.trigger_arrivals));
    c.expect(slow.invocations + slow.coalesced == slow.trigger_arrivals, "slow: invocations + coalesced != delivered");
    c.expect(slow.coalesced > 0, "slow body never coalesced");
    c.note("fast 1000/1000 coalesced 0; slow " + std::to_string(slow.invocations) + " + " +
           std::to_string(slow.coalesced) + " = " + std::to_string(slow.trigger_arrivals));
    return c.outcome();
}

Outcome overhead_bench() {
    Checker c;
    bench::SynthSpec spec;
    spec.imu_rate_hz = 20;
    spec.imu = {{10, bench::ImuProfile::smooth, 0.0, {}, {}, {}}};
    const Bag bag = bench::synth_bag(spec);

    bench::BenchRunConfig cfg;
    cfg.manifests = {echo_on("echo_noop", "/sensors/imu", 0), echo_on("echo_20ms", "/sensors/imu", 20)};
    cfg.plan = {20, 3, 20};
    const auto result = bench::run_bench(bag, cfg);

    std::map<std::string, std::vector<double>> rtts;
    for (const auto& row : result.rows) rtts[row.function].push_back(row.rtt_ms);
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? NAN : s / double(v.size());
    };
    const double noop = mean_of(rtts["echo_noop"]), slow = mean_of(rtts["echo_20ms"]);
    // 60 s at 20 Hz; allow for the odd record straddling a phase edge.
    c.expect(rtts["echo_noop"].size() >= 1150, "no-op rows " + std::to_string(rtts["echo_noop"].size()));
    c.expect(rtts["echo_20ms"].size() >= 1150, "20 ms rows " + std::to_string(rtts["echo_20ms"].size()));
    c.expect(noop < 5.0, "no-op mean " + fmt(noop) + " ms");
    c.expect(slow >= 20.0 && slow <= 25.0, "20 ms mean " + fmt(slow) + " ms");
    for (const auto& h : result.hosts) c.expect(h.failures == 0, h.function + " failed");
    c.note("no-op mean " + fmt(noop) + " ms (n=" + std::to_string(rtts["echo_noop"].size()) + "), 20 ms mean " +
           fmt(slow) + " ms (n=" + std::to_string(rtts["echo_20ms"].size()) + ")");
    return c.outcome();
}

FunctionManifest fake_manifest(const std::string& name, Params params = {}) {
    FunctionManifest m;
    m.name = name;
    m.version = "1.0.0";
    m.mode = ScheduleMode::periodic;
    m.period_ms = 100;
    m.entry_ref = "echo";
    m.params = std::move(params);
    return m;
}

struct Catalog {
    std::map<std::string, Bytes> blobs;

    DeployedFunction add(const FunctionManifest& m) {
        const std::string text = to_json(m).dump();
        Bytes blob(text.begin(), text.end());
        const std::string checksum = sha256_hex(blob);
        blobs[checksum] = blob;
        return {m, checksum, PackageKind::native_ref};
    }
    PackageFetcher fetcher() const {
        return [this](const std::string& checksum) {
            auto it = blobs.find(checksum);
            if (it == blobs.end()) throw Error(Errc::unknown_package, checksum);
            return it->second;
        };
    }
};

Outcome orchestrator_convergence() {
    Checker c;
    TempDir dir("accept-sup");
    Catalog cat;
    SupervisorOptions o;
    o.host_command = {EDGEFN_FAKE_HOST};
    o.data_root = dir.path();
    o.grace = 2s;
    std::size_t converged = 0;
    {
        Supervisor sup(o);
        std::mt19937 rng(808);
        const std::vector<std::string> names = {"f0", "f1", "f2", "f3", "f4", "f5"};
        for (std::uint64_t round = 1; round <= 50; ++round) {
            std::vector<DeployedFunction> fns;
            std::set<std::string> expected;
            for (const auto& n : names) {
                if (rng() % 2 == 0) continue;
                fns.push_back(cat.add(fake_manifest(n, {{"variant", std::to_string(rng() % 3)}})));
                expected.insert(n);
            }
            sup.apply({"car-1", round, fns}, cat.fetcher());
            const bool ok = eventually([&] { return sup.running() == expected; }, 10s);
            c.expect(ok, "round " + std::to_string(round) + " did not converge");
            if (!ok) continue;
            ++converged;
            for (const auto& n : expected) {
                const auto p = sup.process(n);
                c.expect(p && p->pid > 0 && ::kill(p->pid, 0) == 0, n + " is not alive in round " + std::to_string(round));
            }
        }
        sup.stop_all();
        c.expect(sup.running().empty(), "processes left after stop_all");
    }

    // Documented schedule: 500 ms doubling, capped at 30 s, ten restarts.
    std::vector<Millis> schedule;
    for (std::size_t i = 0; i < 10; ++i) schedule.push_back(std::min(Millis(500 << std::min<std::size_t>(i, 10)), Millis(30000)));
    o.backoff.time_scale = 0.01;
    Supervisor sup(o);
    const auto f = cat.add(fake_manifest("loop", {{"fake_behavior", "crash"}}));
    const auto t0 = Clock::now();
    sup.apply({"car-1", 1, {f}}, cat.fetcher());
    const bool failed = eventually([&] { return sup.process("loop")->state == ProcessState::failed_permanent; }, 30s);
    const double elapsed = seconds_since(t0);
    const auto p = *sup.process("loop");
    c.expect(failed, "crash loop never reached failed_permanent");
    c.expect(p.restart_count == 10, "restart_count " + std::to_string(p.restart_count));
    c.expect(p.restart_delays == schedule, "restart delays differ from the documented schedule");
    // Sum of the nominal delays is 151.5 s; scaled by 0.01.
    c.expect(elapsed >= 1.515 && elapsed < 10.0, "crash loop took " + fmt(elapsed) + " s");
    c.note(std::to_string(converged) + "/50 rounds converged; crash loop failed_permanent after " + fmt(elapsed, 2) +
           " s with delays 500..30000 ms");
    return c.outcome();
}

// --- End-to-end scenario -----------------------------------------------------

struct Decision {
    std::string function;
    std::string action;
    std::string label;
    std::uint64_t cause_seq = 0;

    bool operator==(const Decision&) const = default;
};

std::string describe(const std::vector<Decision>& ds) {
    std::string out;
    for (const auto& d : ds) out += (out.empty() ? "" : " ") + d.action + "@" + std::to_string(d.cause_seq);
    return out.empty() ? "none" : out;
}

// Roughness score from scratch: Hann window, DFT restricted to band bins.
class RoughnessOracle {
public:
    explicit RoughnessOracle(std::size_t n, double fs) : n_(n) {
        const std::vector<std::pair<double, double>> bands = {{0.5, 4.0}, {4.0, 12.0}, {12.0, 30.0}};
        const std::vector<double> weights = {0.2, 0.5, 0.3};
        for (std::size_t m = 1; m <= n / 2; ++m) {
            const double f = double(m) * fs / double(n);
            for (std::size_t b = 0; b < bands.size(); ++b)
                if (f >= bands[b].first && f < bands[b].second) bins_.push_back({m, weights[b]});
        }
        cos_.resize(n);
        sin_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            cos_[k] = std::cos(2 * std::numbers::pi * double(k) / double(n));
            sin_[k] = std::sin(2 * std::numbers::pi * double(k) / double(n));
        }
    }

    double score(const std::vector<double>& window) const {
        double mean = 0;
        for (double v : window) mean += v;
        mean /= double(n_);
        std::vector<double> y(n_);
        for (std::size_t i = 0; i < n_; ++i)
            y[i] = (window[i] - mean) * 0.5 * (1 - std::cos(2 * std::numbers::pi * double(i) / double(n_)));
        double s = 0;
        for (const auto& [m, w] : bins_) {
            double re = 0, im = 0;
            for (std::size_t i = 0; i < n_; ++i) {
                const std::size_t k = (m * i) % n_;
                re += y[i] * cos_[k];
                im -= y[i] * sin_[k];
            }
            s += w * (re * re + im * im);
        }
        return s;
    }

private:
    std::size_t n_;
    std::vector<std::pair<std::size_t, double>> bins_;
    std::vector<double> cos_, sin_;
};

// Start/stop latch, written out independently of the library.
struct Latch {
    bool on = false;
    std::optional<std::string> step(bool start, bool stop) {
        if (!on && start) return on = true, std::optional<std::string>("start_recording");
        if (on && stop) return on = false, std::optional<std::string>("stop_recording");
        return std::nullopt;
    }
};

struct ScenarioOracle {
    std::vector<Decision> imu_fft, brake_dark, detector;
};

ScenarioOracle predict(const Bag& bag, const std::vector<std::uint64_t>& seqs, double start_threshold) {
    ScenarioOracle out;
    const std::uint32_t imu_topic = topic_of(bag, "/sensors/imu");
    RoughnessOracle rough(256, 100.0);
    Latch rough_latch, brake_latch;
    std::vector<double> z, x;
    for (std::size_t i = 0; i < bag.records.size(); ++i) {
        const auto& rec = bag.records[i];
        if (rec.topic == imu_topic) {
            const auto s = decode_imu(rec.payload);
            z.push_back(s.accel[2]);
            x.push_back(s.accel[0]);
            if (z.size() < 256) continue;
            const double score = rough.score(std::vector<double>(z.end() - 256, z.end()));
            if (auto a = rough_latch.step(score > start_threshold, score < 0.8 * start_threshold))
                out.imu_fft.push_back({"imu_fft", *a, "road_roughness", seqs[i]});
            continue;
        }
        const ImageView img = decode_image(rec.payload);
        // brake_dark: mean longitudinal accel over the ten newest IMU samples.
        if (x.size() >= 10) {
            double ax = 0;
            for (auto it = x.end() - 10; it != x.end(); ++it) ax += *it;
            double luma = 0;
            for (std::size_t p = 0; p < std::size_t(img.height) * img.width; ++p) luma += img.pixels[p];
            const bool both = ax / 10 <= -3.0 && luma / double(img.height * img.width) < 50.0;
            if (auto a = brake_latch.step(both, !both)) out.brake_dark.push_back({"brake_dark", *a, "brake_dark", seqs[i]});
        }
        std::vector<oracle::Box> boxes;
        for (const auto& d : decode_mock_detections(img.pixels))
            boxes.push_back({d.x1, d.y1, d.x2, d.y2, d.class_id, d.confidence});
        const auto kept = oracle::greedy_nms(boxes, 0.45);
        if (std::any_of(kept.begin(), kept.end(), [](const oracle::Box& b) { return b.cls <= 1 && b.conf > 0.5f; }))
            out.detector.push_back({"detector", "mark", "detection", seqs[i]});
    }
    return out;
}

Outcome end_to_end() {
    Checker c;
    const Bag bag = bench::synth_bag(bench::default_synth_spec());
    auto transport = std::make_shared<LocalTransport>();
    auto actions = transport->subscribe(kActionsTopic, QosProfile::keep_last(4096));

    const auto imu_manifest = test_manifest("imu_fft.json");
    const double start_threshold = std::stod(imu_manifest.params.at("start_threshold"));
    std::vector<std::unique_ptr<RunningHost>> hosts;
    for (const auto& m : {imu_manifest, test_manifest("brake_dark.json"), test_manifest("detector.json")})
        hosts.push_back(std::make_unique<RunningHost>(m, transport));

    const std::uint32_t imu_topic = topic_of(bag, "/sensors/imu");
    std::vector<std::uint64_t> seqs;
    std::size_t imu_count = 0, frame_count = 0;
    // Tightest spacing between consecutive IMU publishes, to tell replay
    // stalls apart from slow invocations when coalescing shows up.
    Nanos last_imu = 0, min_gap = std::numeric_limits<Nanos>::max();
    bench::replay(bag, *transport, {1.0, true, false, 0}, nullptr,
                  [&](const BagRecord& rec, const PublishResult& r, Nanos) {
                      seqs.push_back(r.seq);
                      if (rec.topic != imu_topic) {
                          ++frame_count;
                          return;
                      }
                      const Nanos now = monotonic_now();
                      if (imu_count++ > 0) min_gap = std::min(min_gap, now - last_imu);
                      last_imu = now;
                  });
    const std::vector<std::uint64_t> expected_triggers = {imu_count, frame_count, frame_count};
    for (std::size_t h = 0; h < hosts.size(); ++h) {
        auto& host = *hosts[h]->host;
        eventually(
            [&] {
                const auto s = host.status();
                return s.trigger_arrivals == expected_triggers[h] && s.invocations + s.coalesced == s.trigger_arrivals;
            },
            10s);
    }
    std::map<std::string, HostStatus> statuses;
    for (auto& h : hosts) statuses[h->host->manifest().name] = h->host->status();
    for (auto& h : hosts) c.expect(h->error.empty(), h->error);
    hosts.clear();

    std::map<std::string, std::vector<Decision>> live;
    for (auto& env : actions.drain()) {
        const auto a = trigger_action_from_json(parse_json_bytes(env.bytes()));
        live[a.function].push_back({a.function, std::string(action_name(a.action)), a.label, a.cause_seq.value_or(0)});
    }
    const auto want = predict(bag, seqs, start_threshold);
    for (const auto& [name, s] : statuses) {
        c.expect(s.coalesced == 0, name + " coalesced " + std::to_string(s.coalesced) + " (min IMU gap " +
                                       fmt(to_millis(min_gap), 2) + " ms)");
        c.expect(s.failures == 0, name + " failed " + std::to_string(s.failures) + " times");
    }
    c.expect(statuses["imu_fft"].invocations == imu_count, "imu_fft invocations");
    c.expect(statuses["detector"].invocations == frame_count, "detector invocations");
    c.expect(live["imu_fft"] == want.imu_fft,
             "imu_fft " + describe(live["imu_fft"]) + " vs oracle " + describe(want.imu_fft));
    c.expect(live["brake_dark"] == want.brake_dark,
             "brake_dark " + describe(live["brake_dark"]) + " vs oracle " + describe(want.brake_dark));
    c.expect(live["detector"] == want.detector,
             "detector " + describe(live["detector"]) + " vs oracle " + describe(want.detector));
    c.expect(!want.imu_fft.empty() && !want.brake_dark.empty() && !want.detector.empty(),
             "scenario produced an empty oracle sequence");
    c.note(std::to_string(imu_count) + " IMU + " + std::to_string(frame_count) + " frames; imu_fft " +
           describe(want.imu_fft) + "; brake_dark " + describe(want.brake_dark) + "; detector " +
           std::to_string(want.detector.size()) + " marks");
    return c.outcome();
}

// --- Registry durability ----------------------------------------------------

Outcome registry_durability() {
    Checker c;
    TempDir dir("accept-registry");
    const std::string user = "ops-secret", car = "car-secret";
    Tokens tokens;
    tokens.users["ops"] = sha256_hex(std::string_view(user));
    tokens.vehicles["car-1"] = sha256_hex(std::string_view(car));
    const auto data = dir / "data";
    const auto vehicles_ep = Endpoint::parse(dir.sock("v.sock"));
    const auto ops_ep = Endpoint::parse(dir.sock("o.sock"));

    const json manifest = to_json(test_manifest("imu_fft.json"));
    json before_logs, before_list;
    std::string checksum;
    {
        auto store = std::make_shared<RegistryStore>(data, tokens);
        RegistryServer server(store, vehicles_ep, ops_ep);
        const auto ops = server.ops_endpoint();
        checksum = ops_call(ops, ControlType::put_package,
                            {{"token", user}, {"name", "imu_fft"}, {"version", "1.0.0"}, {"manifest", manifest}})
                       ["package"]["checksum"];
        const json fn = {{"name", "imu_fft"}, {"version", "1.0.0"}, {"autostart", true}};
        ops_call(ops, ControlType::set_deployment, {{"token", user}, {"vehicle", "car-1"}, {"functions", json::array({fn})}});
        json tuned = fn;
        tuned["params"] = {{"start_threshold", "200"}};
        const auto set2 = ops_call(ops, ControlType::set_deployment,
                                   {{"token", user}, {"vehicle", "car-1"}, {"functions", json::array({tuned})}});
        c.expect(set2["revision"] == 2, "second deployment revision " + set2["revision"].dump());

        auto ch = ControlChannel::connect(server.vehicle_endpoint());
        ch.send({ControlType::hello, 1, {{"vehicle_id", "car-1"}, {"token", car}, {"applied_revision", 0}}});
        c.expect(ch.recv_for(2s).has_value(), "hello unanswered");
        ch.recv_for(2s);  // initial desired state
        json records = json::array();
        for (int i = 0; i < 5; ++i)
            records.push_back({{"ts", 1000 + i}, {"function", "imu_fft"}, {"level", i % 2 ? "warn" : "info"},
                               {"message", "record " + std::to_string(i)}});
        ch.send({ControlType::log, 2, {{"records", records}}});
        const auto ack = ch.recv_for(2s);
        c.expect(ack && ack->payload.value("accepted", 0) == 5, "log batch not accepted");
        ch.close();

        before_logs = ops_call(ops, ControlType::query_logs, {{"token", user}, {"vehicle", "car-1"}})["records"];
        before_list = ops_call(ops, ControlType::list, {{"token", user}});
        server.stop();
    }

    auto store = std::make_shared<RegistryStore>(data, tokens);
    RegistryServer server(store, vehicles_ep, ops_ep);
    const auto ops = server.ops_endpoint();
    const auto logs = ops_call(ops, ControlType::query_logs, {{"token", user}, {"vehicle", "car-1"}})["records"];
    const auto listed = ops_call(ops, ControlType::list, {{"token", user}});
    c.expect(logs.size() == 5 && logs == before_logs, "logs differ after restart");
    c.expect(listed["packages"] == before_list["packages"], "package list differs after restart");

    const auto desired = store->desired_state("car-1");
    c.expect(desired.revision == 2, "revision " + std::to_string(desired.revision) + " after restart");
    c.expect(desired.functions.size() == 1 && desired.functions[0].checksum == checksum &&
                 desired.functions[0].manifest.params.at("start_threshold") == "200",
             "desired state differs after restart");
    c.expect(sha256_hex(store->package_blob(checksum)) == checksum, "package blob unreadable");

    // A reconnecting vehicle receives the preserved revision.
    auto ch = ControlChannel::connect(server.vehicle_endpoint());
    ch.send({ControlType::hello, 1, {{"vehicle_id", "car-1"}, {"token", car}, {"applied_revision", 0}}});
    ch.recv_for(2s);
    const auto pushed = ch.recv_for(2s);
    c.expect(pushed && pushed->type == ControlType::desired_state &&
                 desired_state_from_json(pushed->payload).revision == 2,
             "reconnect did not push revision 2");
    ch.close();
    const auto next = ops_call(ops, ControlType::set_deployment, {{"token", user}, {"vehicle", "car-1"}, {"functions", json::array()}});
    c.expect(next["revision"] == 3, "revision after restart did not continue at 3");
    server.stop();
    c.note("package, revision 2, desired params and 5 log records survived a restart; next revision 3");
    return c.outcome();
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0 when the criterion carries no runtime bound
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);
    const std::vector<Criterion> all = {
        {1, "stats oracle", 1, stats_oracle},
        {2, "mann-whitney", 10, mwu_oracle},
        {3, "fft oracle", 30, fft_oracle},
        {4, "nms oracle", 10, nms_oracle},
        {5, "ingress stress", 60, ingress_stress},
        {6, "event-mode exactness", 0, event_exactness},
        {7, "overhead benchmark", 0, overhead_bench},
        {8, "orchestrator convergence", 120, orchestrator_convergence},
        {9, "end-to-end scenario", 120, end_to_end},
        {10, "registry durability", 0, registry_durability},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& cr : all) {
        if (!selected.empty() && !selected.count(cr.id)) continue;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = cr.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double took = seconds_since(t0);
        if (cr.limit_s > 0 && took >= cr.limit_s) {
            out.pass = false;
            out.detail += "; over the " + fmt(cr.limit_s, 0) + " s limit";
        }
        failed += !out.pass;
        std::printf("criterion %d: %s (%.2f s) %s: %s\n", cr.id, out.pass ? "PASS" : "FAIL", took, cr.name,
                    out.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
