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

// Drives the edgefn binary as a subprocess.

#include <doctest.h>

#include <fstream>
#include <memory>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "edgefn/edgefn.h"
#include "test_support.hpp"

using json = nlohmann::json;
using edgefn::test::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with `args` through the shell; stderr is folded into `out`
// when `merge` is set.
Run cli(const std::string& args, bool merge = true) {
    const std::string cmd = std::string("'") + EDGEFN_CLI + "' " + args + (merge ? " 2>&1" : " 2>/dev/null");
    std::unique_ptr<FILE, int (*)(FILE*)> p(popen(cmd.c_str(), "r"), pclose);
    REQUIRE(p);
    Run r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p.get())) > 0) r.out.append(buf, n);
    const int status = pclose(p.release());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return r;
}

std::string digest(const std::string& text) {
    std::unique_ptr<FILE, int (*)(FILE*)> p(popen(("printf %s '" + text + "' | sha256sum").c_str(), "r"), pclose);
    char buf[65] = {};
    REQUIRE(std::fread(buf, 1, 64, p.get()) == 64);
    return buf;
}

const std::string kManifests = std::string(EDGEFN_TEST_DATA) + "/manifests/";

} // namespace

namespace {

// Leaf command paths ("bag info", "plot", ...) listed by --help-all.
std::vector<std::string> leaf_commands(const std::string& help_all) {
    std::vector<std::string> leaves;
    std::istringstream in(help_all);
    std::string line, group;
    bool in_commands = false, group_has_children = false;
    auto close_group = [&] {
        if (!group.empty() && !group_has_children) leaves.push_back(group);
    };
    while (std::getline(in, line)) {
        if (line == "Subcommands:") {
            in_commands = true;
            continue;
        }
        if (!in_commands || line.empty()) continue;
        if (line[0] != ' ') {
            close_group();
            group = line;
            group_has_children = false;
        } else if (line.rfind("    ", 0) == 0 && line[4] != ' ' && line[4] != '-') {
            group_has_children = true;
            leaves.push_back(group + " " + line.substr(4, line.find(' ', 4) - 4));
        }
    }
    close_group();
    return leaves;
}

// Option lines of one --help page that lack a description, either on the
// same line or wrapped onto the next.
std::vector<std::string> undocumented_options(const std::string& help, std::size_t& seen) {
    static const std::regex option(R"(^\s+(-\w,)?--[a-z][a-z0-9-]*\b.*)");
    static const std::regex same_line(R"(^\s+(-\w,)?--\S+.*\S\s{2,}\S.*$)");
    static const std::regex wrapped(R"(^\s{8,}[^\s-].*$)");
    std::vector<std::string> lines, missing;
    std::istringstream in(help);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!std::regex_match(lines[i], option)) continue;
        ++seen;
        const bool ok = std::regex_match(lines[i], same_line) ||
                        (i + 1 < lines.size() && std::regex_match(lines[i + 1], wrapped));
        if (!ok) missing.push_back(lines[i]);
    }
    return missing;
}

} // namespace

TEST_CASE("help documents every flag of every subcommand") {
    const Run root = cli("--help-all");
    REQUIRE(root.code == 0);
    const auto leaves = leaf_commands(root.out);
    CHECK(leaves.size() == 18);

    std::string all = root.out;
    std::size_t options = 0;
    for (const auto& m : undocumented_options(root.out, options)) FAIL_CHECK("root: " << m);
    for (const auto& leaf : leaves) {
        const Run h = cli(leaf + " --help");
        CHECK_MESSAGE(h.code == 0, leaf);
        for (const auto& m : undocumented_options(h.out, options)) FAIL_CHECK(leaf << ": " << m);
        all += h.out;
    }
    CHECK(options > 60);

    // Flags that deployment scripts and the orchestrator rely on.
    for (const char* flag :
         {"--config", "--log-level", "--transport", "--seed", "--manifest", "--orchestrator-channel",
          "--instrument-rtt", "--affinity", "--registry", "--vehicle-id", "--token", "--data-root",
          "--listen-vehicles", "--listen-ops", "--data-dir", "--tokens-file", "--bag", "--manifests", "--plan",
          "--csv", "--csv-a", "--csv-b", "--out", "--speed", "--loop", "--max-loops", "--index", "--vehicle",
          "--function", "--param", "--autostart", "--listen", "--imu-topic"})
        CHECK_MESSAGE(all.find(flag) != std::string::npos, flag);
}

TEST_CASE("usage errors exit 1") {
    CHECK(cli("").code == 1);
    CHECK(cli("bag").code == 1);
    CHECK(cli("bag info").code == 1);
    CHECK(cli("bench run --bag /nonexistent --manifests x").code == 1);
    CHECK(cli("--log-level chatty bag info x").code == 1);
    CHECK(cli("--version").code == 0);
}

TEST_CASE("bag info prints the topic table of a synth bag") {
    TempDir dir("cli-bag");
    {
        std::ofstream spec(dir / "spec.json");
        spec << json{{"seed", 4},
                     {"imu", {{"rate_hz", 40}, {"segments", {{{"duration_s", 1.5}}, {{"duration_s", 1}, {"profile", "rough"}}}}}},
                     {"camera", {{"rate_hz", 4}, {"segments", {{{"duration_s", 2.5}}}}}}};
    }
    const auto bag = (dir / "s.bag").string();
    REQUIRE(cli("bag synth --spec " + (dir / "spec.json").string() + " --out " + bag).code == 0);
    const Run r = cli("bag info " + bag, false);
    REQUIRE(r.code == 0);
    // 2.5 s at 40 Hz and at 4 Hz.
    CHECK(r.out.find("110 records") != std::string::npos);
    CHECK(std::regex_search(r.out, std::regex(R"(/sensors/imu\s+imu_sample\s+100\n)")));
    CHECK(std::regex_search(r.out, std::regex(R"(/sensors/camera\s+image_frame\s+10\n)")));

    const Run j = cli("bag info --json --bag " + bag, false);
    REQUIRE(j.code == 0);
    CHECK(json::parse(j.out)["records"] == 110);

    CHECK(cli("bag info " + (dir / "spec.json").string()).code == 2);
}

TEST_CASE("config file values apply, flags win and unknown keys are rejected") {
    TempDir dir("cli-config");
    const auto a = (dir / "a.bag").string(), b = (dir / "b.bag").string(), c = (dir / "c.bag").string();
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << json{{"seed", 11}, {"log_level", "warn"}, {"bag", {{"synth", {{"out", a}}}}}};
    }
    const Run quiet = cli("--config " + (dir / "cfg.json").string() + " bag synth");
    REQUIRE(quiet.code == 0);
    CHECK(quiet.out.empty());  // info line suppressed by log_level=warn
    REQUIRE(cli("--seed 11 bag synth --out " + b).code == 0);
    REQUIRE(cli("--config " + (dir / "cfg.json").string() + " --seed 12 bag synth --out " + c).code == 0);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));

    {
        std::ofstream cfg(dir / "bad.json");
        cfg << json{{"bag", {{"synth", {{"outt", a}}}}}};
    }
    const Run bad = cli("--config " + (dir / "bad.json").string() + " bag synth --out " + a);
    CHECK(bad.code == 1);
    CHECK(bad.out.find("outt") != std::string::npos);
}

TEST_CASE("deploy against a live registry; bad token exits 3") {
    TempDir dir("cli-deploy");
    {
        std::ofstream f(dir / "tokens.json");
        f << json{{"users", {{"op", digest("op-secret")}}}, {"vehicles", {{"car", digest("car-secret")}}}};
    }
    const auto ops = dir.sock("ops.sock");
    edgefn_registry* reg = nullptr;
    REQUIRE(edgefn_registry_start((dir / "data").c_str(), (dir / "tokens.json").c_str(),
                                  dir.sock("veh.sock").c_str(), ops.c_str(), &reg) == EDGEFN_OK);
    std::unique_ptr<edgefn_registry, void (*)(edgefn_registry*)> guard(reg, edgefn_registry_destroy);

    const std::string base = " --ops " + ops;
    REQUIRE(cli("deploy put" + base + " --token op-secret --manifest " + kManifests + "imu_fft.json --version 1.0.0")
                .code == 0);
    CHECK(cli("deploy set" + base + " --token nope --vehicle car --function imu_fft@1.0.0").code == 3);
    CHECK(cli("deploy list" + base + " --token nope").code == 3);
    CHECK(cli("deploy set" + base + " --token op-secret --vehicle car --function imu_fft").code == 1);
    CHECK(cli("deploy set" + base + " --token op-secret --vehicle car --function imu_fft@2.0.0").code == 2);

    const Run set = cli("deploy set" + base +
                            " --token op-secret --vehicle car --function imu_fft@1.0.0 --param imu_fft.window_size=128",
                        false);
    REQUIRE(set.code == 0);
    const json reply = json::parse(set.out);
    CHECK(reply["revision"] == 1);
    CHECK(reply["desired"]["functions"][0]["manifest"]["params"]["window_size"] == "128");

    const Run list = cli("deploy list" + base + " --token op-secret", false);
    REQUIRE(list.code == 0);
    const json l = json::parse(list.out);
    CHECK(l["packages"].size() == 1);
    CHECK(l["vehicles"][0]["revision"] == 1);

    // An orchestrator with the wrong vehicle token gives up with exit 3.
    const Run orch = cli("orchestrator run --registry " + dir.sock("veh.sock") +
                         " --vehicle-id car --token wrong --data-root " + (dir / "v").string());
    CHECK(orch.code == 3);
}

TEST_CASE("bench run produces csv, summary and plot") {
    TempDir dir("cli-bench");
    {
        // Alternating half-second smooth and rough stretches give the roughness
        // detector a transition roughly every half second.
        json segments = json::array();
        for (int i = 0; i < 12; ++i) segments.push_back({{"duration_s", 0.5}, {"profile", i % 2 ? "rough" : "smooth"}});
        std::ofstream spec(dir / "rough.json");
        spec << json{{"seed", 5},
                     {"imu", {{"rate_hz", 100}, {"segments", segments}}},
                     {"camera", {{"rate_hz", 1}, {"segments", {{{"duration_s", 6}}}}}}};
    }
    const auto bag = (dir / "rough.bag").string();
    REQUIRE(cli("bag synth --spec " + (dir / "rough.json").string() + " --out " + bag).code == 0);

    const Run cal = cli("bench calibrate --bag " + bag + " --params '{\"window_size\": 32}'", false);
    REQUIRE(cal.code == 0);
    const json thresholds = json::parse(cal.out);
    CHECK(thresholds["low_score"].get<double>() < thresholds["start_threshold"].get<double>());
    CHECK(thresholds["start_threshold"].get<double>() < thresholds["high_score"].get<double>());
    {
        std::ifstream in(kManifests + "imu_fft.json");
        json m = json::parse(in);
        m["params"] = {{"window_size", "32"},
                       {"start_threshold", std::to_string(thresholds["start_threshold"].get<double>())}};
        std::ofstream(dir / "imu_fft.json") << m;
    }
    const auto out = (dir / "out").string();
    const Run r = cli("bench run --bag " + bag + " --manifests " + (dir / "imu_fft.json").string() +
                          " --plan 0.3,1,2 --speed 2 --out-dir " + out,
                      false);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("imu_fft") != std::string::npos);
    std::ifstream csv(dir / "out" / "rtt.csv");
    std::string header, line;
    std::getline(csv, header);
    CHECK(header == "function,implementation,phase,t_in_ns,t_out_ns,rtt_ms");
    std::size_t rows = 0;
    while (std::getline(csv, line)) rows += line.rfind("imu_fft,edgefn,1,", 0) == 0;
    // About four transitions per second of bag, replayed at twice real time for 2 s.
    CHECK(rows >= 5);
    CHECK(std::filesystem::file_size(dir / "out" / "summary.txt") > 0);
    std::ifstream svg(dir / "out" / "rtt.svg");
    std::string head(5, '\0');
    svg.read(head.data(), 5);
    CHECK(head == "<svg ");

    const Run stats = cli("bench stats --csv " + out + "/rtt.csv", false);
    CHECK(stats.code == 0);
    CHECK(stats.out == r.out);
    CHECK(cli("plot --csv " + out + "/rtt.csv --out " + out + "/again.svg").code == 0);
}
