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

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgefn/error.hpp"

namespace edgefn {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

static_assert(std::endian::native == std::endian::little,
              "wire codecs assume a little-endian host");

// Little-endian appender used by every binary format in the project.
class ByteWriter {
public:
    explicit ByteWriter(Bytes& out) : out_(out) {}

    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }

    void put_bytes(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }

    void put_string(std::string_view s) {
        out_.insert(out_.end(), reinterpret_cast<const std::uint8_t*>(s.data()),
                    reinterpret_cast<const std::uint8_t*>(s.data()) + s.size());
    }

private:
    Bytes& out_;
};

// Bounds-checked little-endian reader. Failures throw Errc::malformed with the
// offset of the first byte that could not be read.
class ByteReader {
public:
    explicit ByteReader(ByteView data, std::size_t base_offset = 0)
        : data_(data), base_(base_offset) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    ByteView get_bytes(std::size_t n) {
        need(n);
        auto view = data_.subspan(pos_, n);
        pos_ += n;
        return view;
    }

    std::string get_string(std::size_t n) {
        auto view = get_bytes(n);
        return std::string(reinterpret_cast<const char*>(view.data()), view.size());
    }

    std::size_t offset() const noexcept { return base_ + pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw Error(Errc::malformed, "truncated input at offset " + std::to_string(offset()));
    }

    ByteView data_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

} // namespace edgefn
