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
#include <optional>

#include "edgefn/bytes.hpp"
#include "edgefn/transport.hpp"

namespace edgefn::wire {

// Envelope body layout (all little-endian):
//   u16 topic length | topic UTF-8 | u64 seq | u64 source_ts | u64 publish_ts |
//   u8 content_type | u32 payload length | payload
// A stream frame is the body prefixed by its u32 length.
Bytes encode_envelope(const Envelope& env);
Envelope decode_envelope(ByteView body);

Bytes encode_frame(const Envelope& env);

// Frame header helpers for stream sockets.
inline constexpr std::size_t kFrameHeaderSize = 4;
std::uint32_t frame_length(ByteView header);

} // namespace edgefn::wire
