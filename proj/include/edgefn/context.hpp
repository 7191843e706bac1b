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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgefn/inference.hpp"
#include "edgefn/ingress.hpp"
#include "edgefn/payloads.hpp"

namespace edgefn {

using Params = std::map<std::string, std::string, std::less<>>;

// What woke the current invocation.
struct InvocationInfo {
    std::uint64_t invocation = 0;
    // Event mode: arrivals represented by this wakeup and the newest trigger envelope.
    std::uint64_t trigger_count = 0;
    std::optional<std::uint64_t> cause_seq;
    // Source timestamp of the trigger envelope, or the scheduled tick in periodic mode.
    Nanos t_in = 0;
};

struct TriggerRequest {
    ActionKind action = ActionKind::mark;
    std::string label;
    // Defaults to the seq of the envelope that triggered the invocation.
    std::optional<std::uint64_t> cause_seq;
};

// The four-call surface a function body sees: data access, triggering,
// inference and logging. Only valid on the execution thread during invoke().
class Context {
public:
    virtual ~Context() = default;

    virtual std::optional<LatestItem> latest(std::string_view topic) = 0;
    virtual std::vector<RingRecord> window(std::string_view topic, std::size_t n) = 0;
    virtual void trigger(const TriggerRequest& request) = 0;
    virtual Tensors infer(std::string_view model_ref, const Tensors& inputs) = 0;
    virtual void log(LogLevel level, std::string_view message) = 0;

    virtual const InvocationInfo& info() const = 0;
    virtual const std::string& function_name() const = 0;
};

// A lambda function. setup() runs once on load; invoke() runs per wakeup or tick.
class FunctionBody {
public:
    virtual ~FunctionBody() = default;
    virtual void setup(const Params& params) { (void)params; }
    virtual void invoke(Context& ctx) = 0;
};

// Thrown by a body to stop its host for good; any other exception only counts
// as a failed invocation.
class AbortFunction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using FunctionFactory = std::function<std::unique_ptr<FunctionBody>()>;

// Process-wide table of native builtins, keyed by builtin id.
class BuiltinRegistry {
public:
    static BuiltinRegistry& instance();

    void add(std::string id, FunctionFactory factory);
    std::unique_ptr<FunctionBody> create(std::string_view id) const;
    bool contains(std::string_view id) const;
    std::vector<std::string> ids() const;

private:
    BuiltinRegistry();
    mutable std::mutex mu_;
    std::map<std::string, FunctionFactory, std::less<>> factories_;
};

// Loader for guest packages. Guest runtimes register here; without one, every
// guest entry fails to load.
class GuestRuntime {
public:
    virtual ~GuestRuntime() = default;
    virtual std::unique_ptr<FunctionBody> load(const std::string& package_ref) = 0;
};

void set_guest_runtime(std::shared_ptr<GuestRuntime> runtime);
std::shared_ptr<GuestRuntime> guest_runtime();

} // namespace edgefn
