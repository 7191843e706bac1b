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

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_set>

#include "edgefn/socket.hpp"
#include "edgefn/transport.hpp"

namespace edgefn {

// Control topic carrying subscription requests from socket clients. The payload
// is a JSON object {"topic": str, "depth": int, "reliability": "reliable"|"best_effort"}.
inline constexpr std::string_view kSubscribeControlTopic = "/_transport/subscribe";

// Serves a LocalTransport over a stream socket. Envelopes received from a
// client are re-sequenced into the local bus; subscriptions requested by a
// client are forwarded back to it as frames.
class BrokerServer {
public:
    BrokerServer(std::shared_ptr<LocalTransport> bus, const Endpoint& ep);
    ~BrokerServer();
    BrokerServer(const BrokerServer&) = delete;
    BrokerServer& operator=(const BrokerServer&) = delete;

    void stop();
    const Endpoint& endpoint() const noexcept { return endpoint_; }
    std::uint64_t best_effort_drops() const noexcept { return be_drops_.load(); }

private:
    struct Connection;

    void accept_loop();
    void serve(std::shared_ptr<Connection> conn);
    void forward(std::shared_ptr<Connection> conn, std::shared_ptr<Subscription> sub,
                 Reliability rel);

    std::shared_ptr<LocalTransport> bus_;
    Endpoint endpoint_;
    Socket listener_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> be_drops_{0};
    std::mutex mu_;
    std::list<std::shared_ptr<Connection>> connections_;
    std::list<std::thread> threads_;
    std::thread acceptor_;
};

// Client side of the socket transport. Incoming frames are fanned out through
// an internal bus so several local subscriptions can share one connection.
// publish() returns a client-local sequence number; the broker assigns the
// per-topic sequence that subscribers observe.
class SocketTransport final : public Transport {
public:
    explicit SocketTransport(const Endpoint& ep, std::size_t max_payload = kDefaultMaxPayload);
    ~SocketTransport() override;

    using Transport::publish;
    PublishResult publish(std::string_view topic, Payload payload, ContentType type,
                          Nanos source_ts) override;
    Subscription subscribe(std::string_view topic, QosProfile qos) override;
    void shutdown() override;
    bool is_shut_down() const override { return shut_down_.load(); }

private:
    void reader_loop();

    Socket sock_;
    std::size_t max_payload_;
    std::shared_ptr<LocalTransport> local_;
    std::mutex write_mu_;
    std::mutex sub_mu_;
    std::unordered_set<std::string> remote_topics_;
    std::map<std::string, std::uint64_t, std::less<>> local_seq_;
    std::atomic<bool> shut_down_{false};
    std::thread reader_;
};

} // namespace edgefn
