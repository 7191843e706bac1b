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
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "edgefn/bytes.hpp"

namespace edgefn {

enum class ElementType { u8, i32, i64, f32, f64 };

std::size_t element_size(ElementType t) noexcept;

// A named tensor. `data` either views memory owned elsewhere (for example a
// leased frame slot) or memory kept alive through `owner`.
struct Tensor {
    std::string name;
    std::vector<std::int64_t> shape;
    ElementType type = ElementType::u8;
    ByteView data;
    std::shared_ptr<const void> owner;

    static Tensor borrowed(std::string name, std::vector<std::int64_t> shape, ElementType type,
                           ByteView data);
    static Tensor owned(std::string name, std::vector<std::int64_t> shape, ElementType type, Bytes data);

    std::size_t element_count() const;
    template <typename T>
    const T* as() const noexcept { return reinterpret_cast<const T*>(data.data()); }
};

using Tensors = std::vector<Tensor>;

using ModelHandle = std::uint64_t;

class InferenceBackend {
public:
    virtual ~InferenceBackend() = default;
    // Resolves a model reference (name or path). Throws model_not_found.
    virtual ModelHandle load(std::string_view model_ref) = 0;
    virtual Tensors run(ModelHandle model, const Tensors& inputs) = 0;
};

inline constexpr std::string_view kMockDetectorModel = "mock-detector";

// Deterministic stand-in for a detector network. Model "mock-detector" takes
// one u8 tensor of rank 1 (raw bytes) or rank 3 (height, width, channels)
// whose leading bytes hold a mock detection block and returns a (k, 6) f32
// tensor "detections" with rows x1, y1, x2, y2, class, confidence.
class MockInferenceBackend final : public InferenceBackend {
public:
    ModelHandle load(std::string_view model_ref) override;
    Tensors run(ModelHandle model, const Tensors& inputs) override;
};

std::shared_ptr<InferenceBackend> make_default_backend();

} // namespace edgefn
