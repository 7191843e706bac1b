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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "edgefn/bytes.hpp"
#include "edgefn/clock.hpp"

namespace edgefn {

enum class Reliability : std::uint8_t { reliable, best_effort };
enum class Durability : std::uint8_t { volatile_only };

struct QosProfile {
    std::uint32_t history_depth = 10;
    Reliability reliability = Reliability::reliable;
    Durability durability = Durability::volatile_only;

    static QosProfile keep_last(std::uint32_t depth,
                                Reliability rel = Reliability::reliable) {
        return QosProfile{depth, rel, Durability::volatile_only};
    }

    void validate() const;
};

enum class ContentType : std::uint8_t {
    raw_bytes = 0,
    imu_sample = 1,
    image_frame = 2,
    trigger_action = 3,
    rtt_record = 4,
    log_record = 5,
};

std::string_view content_type_name(ContentType t) noexcept;
ContentType content_type_from_name(std::string_view name);

// Payload bytes are immutable once published and shared by every subscriber.
using Payload = std::shared_ptr<const Bytes>;

inline Payload make_payload(ByteView data) { return std::make_shared<const Bytes>(data.begin(), data.end()); }
inline Payload make_payload(Bytes&& data) { return std::make_shared<const Bytes>(std::move(data)); }

struct Envelope {
    std::string topic;
    std::uint64_t seq = 0;
    Nanos source_ts = 0;
    Nanos publish_ts = 0;
    ContentType content_type = ContentType::raw_bytes;
    Payload payload;

    ByteView bytes() const noexcept {
        return payload ? ByteView(*payload) : ByteView();
    }
};

inline constexpr std::size_t kDefaultMaxPayload = 16u << 20;

// Well-known topics.
inline constexpr std::string_view kActionsTopic = "/lambda/actions";
inline constexpr std::string_view kRttTopic = "/lambda/rtt";

// KeepLast(N) queue behind one subscription. Producers never block: an
// overflowing push evicts the oldest entry and bumps the drop counter.
class SubscriptionQueue {
public:
    explicit SubscriptionQueue(QosProfile qos) : qos_(qos) {}

    // Returns false when the push evicted an older envelope.
    bool push(Envelope env);
    std::optional<Envelope> pop(std::chrono::nanoseconds timeout);
    std::optional<Envelope> try_pop();
    std::vector<Envelope> drain();

    void close();
    bool closed() const;

    std::uint64_t dropped() const noexcept { return dropped_.load(std::memory_order_relaxed); }
    std::uint64_t received() const noexcept { return received_.load(std::memory_order_relaxed); }
    const QosProfile& qos() const noexcept { return qos_; }

private:
    QosProfile qos_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Envelope> queue_;
    bool closed_ = false;
    std::atomic<std::uint64_t> dropped_{0};
    std::atomic<std::uint64_t> received_{0};
};

class TopicTable;

// Move-only consumer handle. Destroying it detaches the queue from its topic.
class Subscription {
public:
    Subscription() = default;
    Subscription(std::string topic, std::shared_ptr<SubscriptionQueue> queue,
                 std::weak_ptr<TopicTable> table)
        : topic_(std::move(topic)), queue_(std::move(queue)), table_(std::move(table)) {}
    Subscription(Subscription&&) noexcept = default;
    Subscription& operator=(Subscription&& other) noexcept;
    Subscription(const Subscription&) = delete;
    Subscription& operator=(const Subscription&) = delete;
    ~Subscription();

    std::optional<Envelope> pop(std::chrono::nanoseconds timeout) { return queue_->pop(timeout); }
    std::optional<Envelope> try_pop() { return queue_->try_pop(); }
    std::vector<Envelope> drain() { return queue_->drain(); }

    std::uint64_t dropped() const noexcept { return queue_->dropped(); }
    std::uint64_t received() const noexcept { return queue_->received(); }
    bool closed() const { return queue_->closed(); }
    const std::string& topic() const noexcept { return topic_; }
    const QosProfile& qos() const noexcept { return queue_->qos(); }
    explicit operator bool() const noexcept { return static_cast<bool>(queue_); }

    void reset();

private:
    std::string topic_;
    std::shared_ptr<SubscriptionQueue> queue_;
    std::weak_ptr<TopicTable> table_;
};

struct PublishResult {
    std::uint64_t seq = 0;
    std::size_t delivered = 0;
};

class Transport {
public:
    virtual ~Transport() = default;

    virtual PublishResult publish(std::string_view topic, Payload payload,
                                  ContentType type, Nanos source_ts) = 0;
    virtual Subscription subscribe(std::string_view topic, QosProfile qos) = 0;
    virtual void shutdown() = 0;
    virtual bool is_shut_down() const = 0;

    PublishResult publish(std::string_view topic, ByteView data, ContentType type, Nanos source_ts) {
        return publish(topic, make_payload(data), type, source_ts);
    }
};

// Per-topic subscriber lists and sequence counters. Shared between the
// in-process transport and the subscription handles that detach from it.
class TopicTable {
public:
    PublishResult publish(std::string_view topic, Payload payload, ContentType type,
                          Nanos source_ts);
    // Fans out an envelope whose seq and publish_ts were assigned elsewhere.
    std::size_t deliver(const Envelope& env);
    std::shared_ptr<SubscriptionQueue> add(std::string_view topic, QosProfile qos);
    void remove(const std::string& topic, const SubscriptionQueue* queue);
    std::size_t subscriber_count(std::string_view topic) const;
    void close_all();

private:
    struct Topic {
        std::mutex mu;
        std::uint64_t next_seq = 1;
        std::vector<std::shared_ptr<SubscriptionQueue>> subscribers;
    };

    Topic& topic_for(std::string_view name);

    mutable std::shared_mutex mu_;
    std::map<std::string, std::unique_ptr<Topic>, std::less<>> topics_;
};

// Shared-queue transport for components living in one process.
class LocalTransport final : public Transport {
public:
    explicit LocalTransport(std::size_t max_payload = kDefaultMaxPayload);
    ~LocalTransport() override;

    using Transport::publish;
    PublishResult publish(std::string_view topic, Payload payload, ContentType type,
                          Nanos source_ts) override;
    Subscription subscribe(std::string_view topic, QosProfile qos) override;
    void shutdown() override;
    bool is_shut_down() const override { return shut_down_.load(); }

    std::size_t deliver(const Envelope& env);
    std::size_t subscriber_count(std::string_view topic) const { return table_->subscriber_count(topic); }
    std::size_t max_payload() const noexcept { return max_payload_; }

private:
    std::size_t max_payload_;
    std::shared_ptr<TopicTable> table_;
    std::atomic<bool> shut_down_{false};
};

void validate_topic(std::string_view topic);

// Builds a transport from an endpoint string: "inproc" for a fresh in-process
// bus, "unix:<path>" or "tcp:<host>:<port>" for a client of a broker.
std::shared_ptr<Transport> make_transport(std::string_view endpoint);

} // namespace edgefn
