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

#include "edgefn/context.hpp"

#include "edgefn/error.hpp"
#include "edgefn/functions.hpp"

namespace edgefn {

BuiltinRegistry& BuiltinRegistry::instance() {
    static BuiltinRegistry registry;
    return registry;
}

BuiltinRegistry::BuiltinRegistry() { functions::register_builtins(*this); }

void BuiltinRegistry::add(std::string id, FunctionFactory factory) {
    std::lock_guard lk(mu_);
    factories_[std::move(id)] = std::move(factory);
}

std::unique_ptr<FunctionBody> BuiltinRegistry::create(std::string_view id) const {
    FunctionFactory factory;
    {
        std::lock_guard lk(mu_);
        auto it = factories_.find(id);
        if (it == factories_.end()) throw Error(Errc::unknown_builtin, "no builtin '" + std::string(id) + "'");
        factory = it->second;
    }
    return factory();
}

bool BuiltinRegistry::contains(std::string_view id) const {
    std::lock_guard lk(mu_);
    return factories_.find(id) != factories_.end();
}

std::vector<std::string> BuiltinRegistry::ids() const {
    std::lock_guard lk(mu_);
    std::vector<std::string> out;
    for (const auto& [id, f] : factories_) out.push_back(id);
    return out;
}

namespace {
std::mutex g_guest_mu;
std::shared_ptr<GuestRuntime> g_guest;
} // namespace

void set_guest_runtime(std::shared_ptr<GuestRuntime> runtime) {
    std::lock_guard lk(g_guest_mu);
    g_guest = std::move(runtime);
}

std::shared_ptr<GuestRuntime> guest_runtime() {
    std::lock_guard lk(g_guest_mu);
    return g_guest;
}

} // namespace edgefn
