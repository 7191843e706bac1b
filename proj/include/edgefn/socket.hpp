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

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "edgefn/bytes.hpp"

namespace edgefn {

// Parsed "unix:<path>" or "tcp:<host>:<port>" endpoint.
struct Endpoint {
    enum class Kind { unix_path, tcp } kind = Kind::unix_path;
    std::string path;
    std::string host;
    std::uint16_t port = 0;

    static Endpoint parse(std::string_view text);
    std::string str() const;
};

// RAII stream socket. Blocking by default.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    static Socket connect(const Endpoint& ep);
    static Socket listen(const Endpoint& ep, int backlog = 16);

    // Returns an invalid socket on timeout or when the listener was shut down.
    Socket accept(std::chrono::milliseconds timeout) const;

    void send_all(ByteView data) const;
    // Attempts a send only when the socket is immediately writable.
    bool try_send_all(ByteView data) const;
    // False on orderly EOF before any byte; throws on partial reads.
    bool recv_exact(std::uint8_t* dst, std::size_t n) const;
    bool readable(std::chrono::milliseconds timeout) const;

    // u32 LE length-prefixed messages.
    void send_frame(ByteView body) const;
    std::optional<Bytes> recv_frame(std::size_t max_size) const;

    void shutdown_both() const noexcept;
    void close() noexcept;
    int release() noexcept { int fd = fd_; fd_ = -1; return fd; }
    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }

    // Bound port for tcp listeners created with port 0.
    std::uint16_t local_port() const;

private:
    int fd_ = -1;
};

} // namespace edgefn
