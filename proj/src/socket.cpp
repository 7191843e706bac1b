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

#include "edgefn/socket.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace edgefn {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw Error(Errc::io_failure, what + ": " + std::strerror(errno));
}

sockaddr_un unix_addr(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof(addr.sun_path))
        throw Error(Errc::invalid_argument, "unix socket path too long: " + path);
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    return addr;
}

} // namespace

Endpoint Endpoint::parse(std::string_view text) {
    Endpoint ep;
    if (text.starts_with("unix:")) {
        ep.kind = Kind::unix_path;
        ep.path = std::string(text.substr(5));
        if (ep.path.empty()) throw Error(Errc::invalid_argument, "empty unix socket path");
        return ep;
    }
    if (text.starts_with("tcp:")) {
        auto rest = text.substr(4);
        auto colon = rest.rfind(':');
        if (colon == std::string_view::npos)
            throw Error(Errc::invalid_argument, "tcp endpoint needs host:port");
        ep.kind = Kind::tcp;
        ep.host = std::string(rest.substr(0, colon));
        int port = 0;
        try {
            port = std::stoi(std::string(rest.substr(colon + 1)));
        } catch (const std::exception&) {
            throw Error(Errc::invalid_argument, "bad port in endpoint '" + std::string(text) + "'");
        }
        if (port < 0 || port > 65535) throw Error(Errc::invalid_argument, "port out of range");
        ep.port = static_cast<std::uint16_t>(port);
        if (ep.host.empty()) ep.host = "127.0.0.1";
        return ep;
    }
    throw Error(Errc::invalid_argument,
                "endpoint must be unix:<path> or tcp:<host>:<port>, got '" + std::string(text) + "'");
}

std::string Endpoint::str() const {
    if (kind == Kind::unix_path) return "unix:" + path;
    return "tcp:" + host + ":" + std::to_string(port);
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.release();
    }
    return *this;
}

Socket Socket::connect(const Endpoint& ep) {
    if (ep.kind == Endpoint::Kind::unix_path) {
        Socket s(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!s.valid()) throw_errno("socket");
        auto addr = unix_addr(ep.path);
        if (::connect(s.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw_errno("connect " + ep.str());
        return s;
    }
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw Error(Errc::io_failure, "resolve " + ep.host + ": " + ::gai_strerror(rc));
    Socket s;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        Socket candidate(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!candidate.valid()) continue;
        if (::connect(candidate.fd_, ai->ai_addr, ai->ai_addrlen) == 0) {
            s = std::move(candidate);
            break;
        }
    }
    ::freeaddrinfo(res);
    if (!s.valid()) throw_errno("connect " + ep.str());
    int one = 1;
    ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return s;
}

Socket Socket::listen(const Endpoint& ep, int backlog) {
    Socket s;
    if (ep.kind == Endpoint::Kind::unix_path) {
        s = Socket(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!s.valid()) throw_errno("socket");
        ::unlink(ep.path.c_str());
        auto addr = unix_addr(ep.path);
        if (::bind(s.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw_errno("bind " + ep.str());
    } else {
        s = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
        if (!s.valid()) throw_errno("socket");
        int one = 1;
        ::setsockopt(s.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (::inet_pton(AF_INET, ep.host == "localhost" ? "127.0.0.1" : ep.host.c_str(),
                        &addr.sin_addr) != 1)
            throw Error(Errc::invalid_argument, "listen host must be an IPv4 address: " + ep.host);
        if (::bind(s.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw_errno("bind " + ep.str());
    }
    if (::listen(s.fd_, backlog) != 0) throw_errno("listen " + ep.str());
    return s;
}

Socket Socket::accept(std::chrono::milliseconds timeout) const {
    if (!readable(timeout)) return Socket();
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return Socket();
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

bool Socket::readable(std::chrono::milliseconds timeout) const {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    return rc > 0 && (pfd.revents & (POLLIN | POLLHUP | POLLERR));
}

void Socket::send_all(ByteView data) const {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

bool Socket::try_send_all(ByteView data) const {
    pollfd pfd{fd_, POLLOUT, 0};
    if (::poll(&pfd, 1, 0) <= 0 || !(pfd.revents & POLLOUT)) return false;
    send_all(data);
    return true;
}

bool Socket::recv_exact(std::uint8_t* dst, std::size_t n) const {
    std::size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd_, dst + got, n - got, 0);
        if (r == 0) {
            if (got == 0) return false;
            throw Error(Errc::io_failure, "connection closed mid-message");
        }
        if (r < 0) {
            if (errno == EINTR) continue;
            if (got == 0 && (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN)) return false;
            throw_errno("recv");
        }
        got += static_cast<std::size_t>(r);
    }
    return true;
}

void Socket::send_frame(ByteView body) const {
    Bytes buf;
    buf.reserve(4 + body.size());
    ByteWriter w(buf);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(body.size()));
    w.put_bytes(body);
    send_all(buf);
}

std::optional<Bytes> Socket::recv_frame(std::size_t max_size) const {
    std::uint8_t header[4];
    if (!recv_exact(header, sizeof(header))) return std::nullopt;
    std::uint32_t len;
    std::memcpy(&len, header, 4);
    if (len > max_size)
        throw Error(Errc::payload_too_large, "frame of " + std::to_string(len) + " bytes");
    Bytes body(len);
    if (len > 0 && !recv_exact(body.data(), len))
        throw Error(Errc::io_failure, "connection closed mid-frame");
    return body;
}

void Socket::shutdown_both() const noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::uint16_t Socket::local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw_errno("getsockname");
    return ntohs(addr.sin_port);
}

} // namespace edgefn
