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

// Exercises the shared library through its C header only.

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefn/edgefn.h"
#include "test_support.hpp"

using json = nlohmann::json;
using edgefn::test::eventually;
using edgefn::test::TempDir;

namespace {

json take(char* raw) {
    REQUIRE(raw != nullptr);
    json j = json::parse(raw);
    edgefn_string_free(raw);
    return j;
}

std::string sha256_of(const std::string& text) {
    // Only used for token files; the registry tests cover the digest itself.
    std::string cmd = "printf %s '" + text + "' | sha256sum";
    std::unique_ptr<FILE, int (*)(FILE*)> p(popen(cmd.c_str(), "r"), pclose);
    char buf[65] = {};
    REQUIRE(std::fread(buf, 1, 64, p.get()) == 64);
    return buf;
}

std::string small_spec(int seed) {
    return json{{"seed", seed},
                {"imu", {{"rate_hz", 50}, {"segments", {{{"duration_s", 2}, {"profile", "rough"}}}}}},
                {"camera", {{"rate_hz", 5}, {"segments", {{{"duration_s", 2}, {"brightness", 40}}}}}}}
        .dump();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Exact two-sided Mann-Whitney p by enumerating every split of the pooled
// sample; assumes no ties.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), m = a.size();
    auto u_of = [&](const std::vector<bool>& pick) {
        double u = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i])
                for (std::size_t k = 0; k < n; ++k)
                    if (!pick[k] && pooled[i] > pooled[k]) u += 1;
        return u;
    };
    const double total = double(m) * double(n - m);
    std::vector<bool> observed(n, false);
    std::fill(observed.begin(), observed.begin() + m, true);
    const double u_obs = std::min(u_of(observed), total - u_of(observed));
    std::vector<bool> pick(n, false);
    std::fill(pick.end() - m, pick.end(), true);
    std::size_t hits = 0, count = 0;
    do {
        const double u = u_of(pick);
        if (std::min(u, total - u) <= u_obs) ++hits;
        ++count;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return std::min(1.0, double(hits) / double(count));
}

} // namespace

TEST_CASE("status names and thread-local error text") {
    CHECK(std::string(edgefn_status_name(EDGEFN_OK)) == "ok");
    CHECK(std::string(edgefn_status_name(EDGEFN_E_AUTH_FAILED)) == "auth-failed");
    CHECK(std::string(edgefn_status_name(EDGEFN_E_INTERNAL)) == "internal");
    CHECK(std::string(edgefn_status_name(static_cast<edgefn_status>(77))) == "unknown");

    CHECK(edgefn_bag_info(nullptr, nullptr) == EDGEFN_E_INVALID_ARGUMENT);
    CHECK(std::string(edgefn_last_error()).find("path") != std::string::npos);

    std::string other;
    std::thread([&] { other = edgefn_last_error(); }).join();
    CHECK(other.empty());

    char* out = nullptr;
    CHECK(edgefn_bag_info("/nonexistent/edgefn.bag", &out) == EDGEFN_E_IO_FAILURE);
    CHECK(out == nullptr);
    CHECK(edgefn_bag_synth("{not json", 1, "/tmp/x.bag") == EDGEFN_E_MALFORMED);
}

TEST_CASE("synth bag counts follow the segment rates and the seed") {
    TempDir dir("capi-synth");
    const auto a = (dir / "a.bag").string(), b = (dir / "b.bag").string(), c = (dir / "c.bag").string();
    REQUIRE(edgefn_bag_synth(small_spec(1).c_str(), -1, a.c_str()) == EDGEFN_OK);
    REQUIRE(edgefn_bag_synth(small_spec(9).c_str(), 1, b.c_str()) == EDGEFN_OK);
    REQUIRE(edgefn_bag_synth(small_spec(1).c_str(), 2, c.c_str()) == EDGEFN_OK);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));

    char* raw = nullptr;
    REQUIRE(edgefn_bag_info(a.c_str(), &raw) == EDGEFN_OK);
    const json info = take(raw);
    // 2 s at 50 Hz and at 5 Hz.
    CHECK(info["records"] == 110);
    REQUIRE(info["topics"].size() == 2);
    CHECK(info["topics"][0]["name"] == "/sensors/imu");
    CHECK(info["topics"][0]["records"] == 100);
    CHECK(info["topics"][1]["content_type"] == "image_frame");
    CHECK(info["topics"][1]["records"] == 10);
}

TEST_CASE("bench stats and compare against hand oracles") {
    TempDir dir("capi-stats");
    const auto a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    {
        std::ofstream f(a);
        f << "function,implementation,phase,t_in_ns,t_out_ns,rtt_ms\n";
        for (double v : {1.0, 2.0, 3.0, 4.0, 10.0}) f << "f,x,1,0,0," << v << "\n";
    }
    {
        std::ofstream f(b);
        f << "function,implementation,phase,t_in_ns,t_out_ns,rtt_ms\n";
        for (double v : {5.5, 6.5, 7.5, 11.0, 12.0, 13.0}) f << "f,y,1,0,0," << v << "\n";
    }
    char* raw = nullptr;
    REQUIRE(edgefn_bench_stats(a.c_str(), &raw) == EDGEFN_OK);
    const json s = take(raw);
    const auto& rows = s["rows"];
    REQUIRE(rows.size() == 2);  // phase 1 and pooled
    for (const auto& r : rows) {
        CHECK(r["n"] == 5);
        CHECK(r["min_ms"].get<double>() == doctest::Approx(1.0));
        CHECK(r["max_ms"].get<double>() == doctest::Approx(10.0));
        CHECK(r["mean_ms"].get<double>() == doctest::Approx(4.0));
        CHECK(r["mad_ms"].get<double>() == doctest::Approx(1.0));  // |x - 3| = 2,1,0,1,7
        CHECK(r["p95_ms"].get<double>() == doctest::Approx(10.0)); // rank ceil(4.75) = 5
    }
    CHECK(s["table"].get<std::string>().find("all") != std::string::npos);

    REQUIRE(edgefn_bench_compare(a.c_str(), b.c_str(), "f", &raw) == EDGEFN_OK);
    const json c = take(raw);
    // a > b only for 10 vs 5.5, 6.5, 7.5.
    CHECK(c["u"].get<double>() == doctest::Approx(3.0));
    CHECK(c["method"] == "exact");
    CHECK(c["p_two_sided"].get<double>() ==
          doctest::Approx(brute_force_p({1, 2, 3, 4, 10}, {5.5, 6.5, 7.5, 11, 12, 13})).epsilon(1e-12));

    CHECK(edgefn_bench_compare(a.c_str(), b.c_str(), "missing", &raw) == EDGEFN_E_EMPTY_INPUT);
}

TEST_CASE("registry round trip and token rejection through the C API") {
    TempDir dir("capi-reg");
    {
        std::ofstream f(dir / "tokens.json");
        f << json{{"users", {{"op", sha256_of("op-secret")}}}, {"vehicles", {{"v1", sha256_of("v1-secret")}}}};
    }
    const auto ops = dir.sock("ops.sock");
    edgefn_registry* reg = nullptr;
    REQUIRE(edgefn_registry_start((dir / "data").c_str(), (dir / "tokens.json").c_str(),
                                  dir.sock("veh.sock").c_str(), ops.c_str(), &reg) == EDGEFN_OK);
    std::unique_ptr<edgefn_registry, void (*)(edgefn_registry*)> guard(reg, edgefn_registry_destroy);

    std::ifstream mf(std::string(EDGEFN_TEST_DATA) + "/manifests/echo.json");
    const json manifest = json::parse(mf);
    {
        std::ofstream blob(dir / "guest.bin", std::ios::binary);
        blob << "guest-archive-bytes";
    }
    json put = {{"token", "op-secret"},
                {"name", "echo"},
                {"version", "2.0.0"},
                {"kind", "guest"},
                {"manifest", manifest},
                {"blob_file", (dir / "guest.bin").string()}};
    char* raw = nullptr;
    REQUIRE(edgefn_ops_request(ops.c_str(), "put_package", put.dump().c_str(), &raw) == EDGEFN_OK);
    const json pkg = take(raw);
    CHECK(pkg["package"]["checksum"] == sha256_of("guest-archive-bytes"));

    put["token"] = "wrong";
    CHECK(edgefn_ops_request(ops.c_str(), "put_package", put.dump().c_str(), &raw) == EDGEFN_E_AUTH_FAILED);
    CHECK(std::string(edgefn_last_error()).rfind("auth-failed:", 0) == 0);
    CHECK(edgefn_ops_request(ops.c_str(), "hello", "{}", &raw) == EDGEFN_E_INVALID_ARGUMENT);

    const json set = {{"token", "op-secret"},
                      {"vehicle", "v1"},
                      {"functions", {{{"name", "echo"}, {"version", "9.9.9"}}}}};
    CHECK(edgefn_ops_request(ops.c_str(), "set_deployment", set.dump().c_str(), &raw) == EDGEFN_E_UNKNOWN_PACKAGE);
}

TEST_CASE("host, broker, replay and recorder through the C API") {
    TempDir dir("capi-host");
    const auto bag = (dir / "s.bag").string();
    REQUIRE(edgefn_bag_synth(small_spec(3).c_str(), -1, bag.c_str()) == EDGEFN_OK);

    edgefn_broker* broker = nullptr;
    REQUIRE(edgefn_broker_start(dir.sock("bus.sock").c_str(), &broker) == EDGEFN_OK);
    const std::string bus = edgefn_broker_endpoint(broker);

    edgefn_host* host = nullptr;
    const std::string manifest = std::string(EDGEFN_TEST_DATA) + "/manifests/echo.json";
    REQUIRE(edgefn_host_create(manifest.c_str(), bus.c_str(), "none", 0, nullptr, &host) == EDGEFN_OK);
    std::atomic<int> run_status{-1};
    std::thread runner([&] { run_status = edgefn_host_run(host); });

    edgefn_cancel* cancel = nullptr;
    REQUIRE(edgefn_cancel_create(&cancel) == EDGEFN_OK);
    const auto rec = (dir / "actions.jsonl").string();
    std::thread recorder([&] { CHECK(edgefn_recorder_run(bus.c_str(), rec.c_str(), cancel) == EDGEFN_OK); });

    auto status = [&] {
        char* raw = nullptr;
        REQUIRE(edgefn_host_status(host, &raw) == EDGEFN_OK);
        return take(raw);
    };
    REQUIRE(eventually([&] { return status()["state"] == "running"; }));
    std::this_thread::sleep_for(std::chrono::milliseconds(200));

    char* raw = nullptr;
    REQUIRE(edgefn_bag_replay(bag.c_str(), bus.c_str(), 20.0, 1, 0, 0, nullptr, &raw) == EDGEFN_OK);
    CHECK(take(raw)["records_sent"] == 110);

    // Every arrival is either invoked or coalesced into a later invocation.
    REQUIRE(eventually([&] {
        const json s = status();
        return s["trigger_arrivals"] == 100 && s["invocations"].get<int>() + s["coalesced"].get<int>() == 100;
    }));
    const json st = status();
    const auto invocations = st["invocations"].get<std::size_t>();
    auto lines = [&] {
        std::ifstream in(rec);
        return std::count(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), '\n');
    };
    CHECK(eventually([&] { return std::size_t(lines()) == invocations; }));

    edgefn_cancel_trigger(cancel);
    recorder.join();
    edgefn_cancel_destroy(cancel);

    edgefn_host_stop(host);
    runner.join();
    CHECK(run_status == EDGEFN_OK);
    edgefn_host_destroy(host);
    edgefn_broker_destroy(broker);
}

TEST_CASE("orchestrator config is validated") {
    edgefn_orchestrator* o = nullptr;
    CHECK(edgefn_orchestrator_start("{\"vehicle_id\":\"v\",\"bogus\":1}", &o) == EDGEFN_E_INVALID_ARGUMENT);
    CHECK(std::string(edgefn_last_error()).find("bogus") != std::string::npos);
    CHECK(edgefn_orchestrator_start("[]", &o) != EDGEFN_OK);
    CHECK(o == nullptr);
    edgefn_orchestrator_destroy(nullptr);
}
