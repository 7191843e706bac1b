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

#include "edgefn/wire.hpp"

#include <limits>

namespace edgefn::wire {

Bytes encode_envelope(const Envelope& env) {
    if (env.topic.size() > std::numeric_limits<std::uint16_t>::max())
        throw Error(Errc::invalid_argument, "topic name longer than 65535 bytes");
    const ByteView payload = env.bytes();
    Bytes out;
    out.reserve(2 + env.topic.size() + 8 * 3 + 1 + 4 + payload.size());
    ByteWriter w(out);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(env.topic.size()));
    w.put_string(env.topic);
    w.put<std::uint64_t>(env.seq);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(env.source_ts));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(env.publish_ts));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(env.content_type));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
    w.put_bytes(payload);
    return out;
}

Envelope decode_envelope(ByteView body) {
    ByteReader r(body);
    Envelope env;
    const auto topic_len = r.get<std::uint16_t>();
    env.topic = r.get_string(topic_len);
    env.seq = r.get<std::uint64_t>();
    env.source_ts = static_cast<Nanos>(r.get<std::uint64_t>());
    env.publish_ts = static_cast<Nanos>(r.get<std::uint64_t>());
    const auto ct = r.get<std::uint8_t>();
    if (ct > static_cast<std::uint8_t>(ContentType::log_record))
        throw Error(Errc::malformed, "unknown content type " + std::to_string(ct));
    env.content_type = static_cast<ContentType>(ct);
    const auto len = r.get<std::uint32_t>();
    env.payload = make_payload(r.get_bytes(len));
    if (!r.done()) throw Error(Errc::malformed, "trailing bytes after envelope payload");
    return env;
}

Bytes encode_frame(const Envelope& env) {
    Bytes body = encode_envelope(env);
    Bytes out;
    out.reserve(kFrameHeaderSize + body.size());
    ByteWriter w(out);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(body.size()));
    w.put_bytes(body);
    return out;
}

std::uint32_t frame_length(ByteView header) {
    ByteReader r(header);
    return r.get<std::uint32_t>();
}

} // namespace edgefn::wire
