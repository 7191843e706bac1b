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

#include "edgefn/inference.hpp"

#include <numeric>

#include "edgefn/error.hpp"
#include "edgefn/payloads.hpp"

namespace edgefn {

std::size_t element_size(ElementType t) noexcept {
    switch (t) {
    case ElementType::u8: return 1;
    case ElementType::i32: return 4;
    case ElementType::f32: return 4;
    case ElementType::i64: return 8;
    case ElementType::f64: return 8;
    }
    return 1;
}

Tensor Tensor::borrowed(std::string name, std::vector<std::int64_t> shape, ElementType type, ByteView data) {
    Tensor t{std::move(name), std::move(shape), type, data, nullptr};
    if (t.element_count() * element_size(type) != data.size())
        throw Error(Errc::shape_mismatch, "tensor '" + t.name + "' shape does not match its data size");
    return t;
}

Tensor Tensor::owned(std::string name, std::vector<std::int64_t> shape, ElementType type, Bytes data) {
    auto storage = std::make_shared<const Bytes>(std::move(data));
    Tensor t{std::move(name), std::move(shape), type, ByteView(*storage), storage};
    if (t.element_count() * element_size(type) != t.data.size())
        throw Error(Errc::shape_mismatch, "tensor '" + t.name + "' shape does not match its data size");
    return t;
}

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw Error(Errc::shape_mismatch, "negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

ModelHandle MockInferenceBackend::load(std::string_view model_ref) {
    if (model_ref != kMockDetectorModel)
        throw Error(Errc::model_not_found, "mock backend has no model '" + std::string(model_ref) + "'");
    return 1;
}

Tensors MockInferenceBackend::run(ModelHandle model, const Tensors& inputs) {
    if (model != 1) throw Error(Errc::model_not_found, "invalid model handle");
    if (inputs.size() != 1) throw Error(Errc::shape_mismatch, "mock-detector takes exactly one input");
    const Tensor& in = inputs.front();
    if (in.type != ElementType::u8) throw Error(Errc::shape_mismatch, "mock-detector input must be u8");
    if (in.shape.size() != 1 && in.shape.size() != 3)
        throw Error(Errc::shape_mismatch,
                    "mock-detector input must have rank 1 or 3, got " + std::to_string(in.shape.size()));

    std::vector<Detection> boxes;
    try {
        boxes = decode_mock_detections(in.data);
    } catch (const Error& e) {
        throw Error(Errc::backend_failure, e.what());
    }
    Bytes out;
    out.reserve(boxes.size() * 6 * sizeof(float));
    ByteWriter w(out);
    for (const auto& b : boxes) {
        w.put<float>(b.x1);
        w.put<float>(b.y1);
        w.put<float>(b.x2);
        w.put<float>(b.y2);
        w.put<float>(static_cast<float>(b.class_id));
        w.put<float>(b.confidence);
    }
    Tensors result;
    result.push_back(Tensor::owned("detections", {static_cast<std::int64_t>(boxes.size()), 6},
                                   ElementType::f32, std::move(out)));
    return result;
}

std::shared_ptr<InferenceBackend> make_default_backend() { return std::make_shared<MockInferenceBackend>(); }

} // namespace edgefn
