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

#include "edgefn/broker.hpp"

#include <nlohmann/json.hpp>

#include "edgefn/wire.hpp"

namespace edgefn {

using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {
constexpr std::size_t kFrameOverhead = 64 * 1024;
}

struct BrokerServer::Connection {
    Socket sock;
    std::mutex write_mu;
    std::atomic<bool> alive{true};
};

BrokerServer::BrokerServer(std::shared_ptr<LocalTransport> bus, const Endpoint& ep)
    : bus_(std::move(bus)), endpoint_(ep), listener_(Socket::listen(ep)) {
    if (endpoint_.kind == Endpoint::Kind::tcp && endpoint_.port == 0)
        endpoint_.port = listener_.local_port();
    acceptor_ = std::thread([this] { accept_loop(); });
}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown_both();
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard lk(mu_);
        for (auto& c : connections_) {
            c->alive = false;
            c->sock.shutdown_both();
        }
    }
    for (;;) {
        std::thread t;
        {
            std::lock_guard lk(mu_);
            if (threads_.empty()) break;
            t = std::move(threads_.front());
            threads_.pop_front();
        }
        if (t.joinable()) t.join();
    }
    listener_.close();
}

void BrokerServer::accept_loop() {
    while (!stopping_.load()) {
        Socket s = listener_.accept(100ms);
        if (!s.valid()) continue;
        auto conn = std::make_shared<Connection>();
        conn->sock = std::move(s);
        std::lock_guard lk(mu_);
        if (stopping_.load()) break;
        connections_.push_back(conn);
        threads_.emplace_back([this, conn] { serve(conn); });
    }
}

void BrokerServer::serve(std::shared_ptr<Connection> conn) {
    try {
        while (!stopping_.load() && conn->alive.load()) {
            auto body = conn->sock.recv_frame(bus_->max_payload() + kFrameOverhead);
            if (!body) break;
            Envelope env = wire::decode_envelope(*body);
            if (env.topic == kSubscribeControlTopic) {
                auto req = json::parse(env.bytes().begin(), env.bytes().end());
                auto qos = QosProfile::keep_last(req.value("depth", 10u),
                                                 req.value("reliability", std::string("reliable")) ==
                                                         "best_effort"
                                                     ? Reliability::best_effort
                                                     : Reliability::reliable);
                auto sub = std::make_shared<Subscription>(
                    bus_->subscribe(req.at("topic").get<std::string>(), qos));
                std::lock_guard lk(mu_);
                threads_.emplace_back(
                    [this, conn, sub, rel = qos.reliability] { forward(conn, sub, rel); });
                continue;
            }
            bus_->publish(env.topic, env.payload, env.content_type, env.source_ts);
        }
    } catch (const std::exception&) {
        // Malformed frame or reset connection: drop the client.
    }
    conn->alive = false;
    conn->sock.shutdown_both();
}

void BrokerServer::forward(std::shared_ptr<Connection> conn, std::shared_ptr<Subscription> sub,
                           Reliability rel) {
    try {
        while (!stopping_.load() && conn->alive.load()) {
            auto env = sub->pop(100ms);
            if (!env) {
                if (sub->closed()) break;
                continue;
            }
            Bytes frame = wire::encode_frame(*env);
            std::lock_guard lk(conn->write_mu);
            if (rel == Reliability::reliable) {
                conn->sock.send_all(frame);
            } else if (!conn->sock.try_send_all(frame)) {
                be_drops_.fetch_add(1);
            }
        }
    } catch (const std::exception&) {
        conn->alive = false;
    }
    sub->reset();
}

// --- SocketTransport -------------------------------------------------------

SocketTransport::SocketTransport(const Endpoint& ep, std::size_t max_payload)
    : sock_(Socket::connect(ep)),
      max_payload_(max_payload),
      local_(std::make_shared<LocalTransport>(max_payload)) {
    reader_ = std::thread([this] { reader_loop(); });
}

SocketTransport::~SocketTransport() {
    shutdown();
    if (reader_.joinable()) reader_.join();
}

void SocketTransport::reader_loop() {
    try {
        while (!shut_down_.load()) {
            auto body = sock_.recv_frame(max_payload_ + kFrameOverhead);
            if (!body) break;
            local_->deliver(wire::decode_envelope(*body));
        }
    } catch (const std::exception&) {
    }
    shut_down_ = true;
    local_->shutdown();
}

PublishResult SocketTransport::publish(std::string_view topic, Payload payload, ContentType type,
                                       Nanos source_ts) {
    if (shut_down_.load()) throw Error(Errc::shut_down, "publish after shutdown");
    validate_topic(topic);
    if (payload && payload->size() > max_payload_)
        throw Error(Errc::payload_too_large, std::to_string(payload->size()) + " bytes");
    Envelope env{std::string(topic), 0, source_ts, monotonic_now(), type,
                 payload ? std::move(payload) : std::make_shared<const Bytes>()};
    std::lock_guard lk(write_mu_);
    auto& seq = local_seq_[env.topic];
    env.seq = ++seq;
    try {
        sock_.send_all(wire::encode_frame(env));
    } catch (const Error&) {
        shut_down_ = true;
        throw Error(Errc::shut_down, "broker connection lost");
    }
    return PublishResult{env.seq, 0};
}

Subscription SocketTransport::subscribe(std::string_view topic, QosProfile qos) {
    if (shut_down_.load()) throw Error(Errc::shut_down, "subscribe after shutdown");
    validate_topic(topic);
    qos.validate();
    Subscription sub = local_->subscribe(topic, qos);
    std::lock_guard lk(sub_mu_);
    if (remote_topics_.insert(std::string(topic)).second) {
        json req = {{"topic", topic},
                    {"depth", qos.history_depth},
                    {"reliability", qos.reliability == Reliability::reliable ? "reliable" : "best_effort"}};
        const std::string text = req.dump();
        Envelope ctl{std::string(kSubscribeControlTopic), 0, monotonic_now(), monotonic_now(),
                     ContentType::raw_bytes,
                     make_payload(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()))};
        std::lock_guard wlk(write_mu_);
        sock_.send_all(wire::encode_frame(ctl));
    }
    return sub;
}

void SocketTransport::shutdown() {
    if (!shut_down_.exchange(true)) {
        sock_.shutdown_both();
        local_->shutdown();
    } else {
        sock_.shutdown_both();
    }
}

} // namespace edgefn
