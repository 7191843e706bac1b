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

#include "edgefn/transport.hpp"

#include <array>

#include "edgefn/broker.hpp"
#include "edgefn/error.hpp"
#include "edgefn/socket.hpp"

namespace edgefn {

void QosProfile::validate() const {
    if (history_depth < 1)
        throw Error(Errc::invalid_argument, "history_depth must be >= 1");
    if (durability != Durability::volatile_only)
        throw Error(Errc::invalid_argument, "only volatile durability is supported");
}

namespace {
constexpr std::array<std::string_view, 6> kContentTypeNames = {
    "raw_bytes", "imu_sample", "image_frame", "trigger_action", "rtt_record", "log_record"};
}

std::string_view content_type_name(ContentType t) noexcept {
    auto i = static_cast<std::size_t>(t);
    return i < kContentTypeNames.size() ? kContentTypeNames[i] : "unknown";
}

ContentType content_type_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kContentTypeNames.size(); ++i)
        if (kContentTypeNames[i] == name) return static_cast<ContentType>(i);
    throw Error(Errc::invalid_argument, "unknown content type '" + std::string(name) + "'");
}

void validate_topic(std::string_view topic) {
    if (topic.empty()) throw Error(Errc::invalid_argument, "topic name must be non-empty");
}

// --- SubscriptionQueue -----------------------------------------------------

bool SubscriptionQueue::push(Envelope env) {
    bool kept_all = true;
    {
        std::lock_guard lk(mu_);
        if (closed_) return true;
        if (queue_.size() >= qos_.history_depth) {
            queue_.pop_front();
            dropped_.fetch_add(1, std::memory_order_relaxed);
            kept_all = false;
        }
        queue_.push_back(std::move(env));
        received_.fetch_add(1, std::memory_order_relaxed);
    }
    cv_.notify_one();
    return kept_all;
}

std::optional<Envelope> SubscriptionQueue::pop(std::chrono::nanoseconds timeout) {
    std::unique_lock lk(mu_);
    if (!cv_.wait_for(lk, timeout, [&] { return !queue_.empty() || closed_; })) return std::nullopt;
    if (queue_.empty()) return std::nullopt;
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    return env;
}

std::optional<Envelope> SubscriptionQueue::try_pop() {
    std::lock_guard lk(mu_);
    if (queue_.empty()) return std::nullopt;
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    return env;
}

std::vector<Envelope> SubscriptionQueue::drain() {
    std::lock_guard lk(mu_);
    std::vector<Envelope> out(std::make_move_iterator(queue_.begin()),
                              std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
}

void SubscriptionQueue::close() {
    {
        std::lock_guard lk(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool SubscriptionQueue::closed() const {
    std::lock_guard lk(mu_);
    return closed_;
}

// --- Subscription ----------------------------------------------------------

Subscription& Subscription::operator=(Subscription&& other) noexcept {
    if (this != &other) {
        reset();
        topic_ = std::move(other.topic_);
        queue_ = std::move(other.queue_);
        table_ = std::move(other.table_);
    }
    return *this;
}

Subscription::~Subscription() { reset(); }

void Subscription::reset() {
    if (!queue_) return;
    if (auto table = table_.lock()) table->remove(topic_, queue_.get());
    queue_.reset();
}

// --- TopicTable ------------------------------------------------------------

TopicTable::Topic& TopicTable::topic_for(std::string_view name) {
    {
        std::shared_lock lk(mu_);
        if (auto it = topics_.find(name); it != topics_.end()) return *it->second;
    }
    std::unique_lock lk(mu_);
    auto [it, inserted] = topics_.try_emplace(std::string(name), nullptr);
    if (inserted) it->second = std::make_unique<Topic>();
    return *it->second;
}

PublishResult TopicTable::publish(std::string_view topic, Payload payload, ContentType type,
                                  Nanos source_ts) {
    Topic& t = topic_for(topic);
    // Sequence assignment and fan-out happen under the topic lock so every
    // subscriber observes publish order.
    std::lock_guard lk(t.mu);
    Envelope env{std::string(topic), t.next_seq++, source_ts, monotonic_now(), type,
                 std::move(payload)};
    for (auto& q : t.subscribers) q->push(env);
    return PublishResult{env.seq, t.subscribers.size()};
}

std::size_t TopicTable::deliver(const Envelope& env) {
    Topic& t = topic_for(env.topic);
    std::lock_guard lk(t.mu);
    if (env.seq >= t.next_seq) t.next_seq = env.seq + 1;
    for (auto& q : t.subscribers) q->push(env);
    return t.subscribers.size();
}

std::shared_ptr<SubscriptionQueue> TopicTable::add(std::string_view topic, QosProfile qos) {
    Topic& t = topic_for(topic);
    auto q = std::make_shared<SubscriptionQueue>(qos);
    std::lock_guard lk(t.mu);
    t.subscribers.push_back(q);
    return q;
}

void TopicTable::remove(const std::string& topic, const SubscriptionQueue* queue) {
    Topic& t = topic_for(topic);
    std::lock_guard lk(t.mu);
    std::erase_if(t.subscribers, [&](const auto& q) { return q.get() == queue; });
}

std::size_t TopicTable::subscriber_count(std::string_view topic) const {
    std::shared_lock lk(mu_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) return 0;
    std::lock_guard tlk(it->second->mu);
    return it->second->subscribers.size();
}

void TopicTable::close_all() {
    std::shared_lock lk(mu_);
    for (auto& [name, t] : topics_) {
        std::lock_guard tlk(t->mu);
        for (auto& q : t->subscribers) q->close();
    }
}

// --- LocalTransport --------------------------------------------------------

LocalTransport::LocalTransport(std::size_t max_payload)
    : max_payload_(max_payload), table_(std::make_shared<TopicTable>()) {}

LocalTransport::~LocalTransport() { shutdown(); }

PublishResult LocalTransport::publish(std::string_view topic, Payload payload, ContentType type,
                                      Nanos source_ts) {
    if (shut_down_.load()) throw Error(Errc::shut_down, "publish after shutdown");
    validate_topic(topic);
    const std::size_t size = payload ? payload->size() : 0;
    if (size > max_payload_)
        throw Error(Errc::payload_too_large,
                    std::to_string(size) + " bytes exceeds limit " + std::to_string(max_payload_));
    if (!payload) payload = std::make_shared<const Bytes>();
    return table_->publish(topic, std::move(payload), type, source_ts);
}

Subscription LocalTransport::subscribe(std::string_view topic, QosProfile qos) {
    if (shut_down_.load()) throw Error(Errc::shut_down, "subscribe after shutdown");
    validate_topic(topic);
    qos.validate();
    auto q = table_->add(topic, qos);
    return Subscription(std::string(topic), std::move(q), table_);
}

void LocalTransport::shutdown() {
    if (shut_down_.exchange(true)) return;
    table_->close_all();
}

std::size_t LocalTransport::deliver(const Envelope& env) {
    if (shut_down_.load()) return 0;
    return table_->deliver(env);
}

std::shared_ptr<Transport> make_transport(std::string_view endpoint) {
    if (endpoint.empty() || endpoint == "inproc") return std::make_shared<LocalTransport>();
    return std::make_shared<SocketTransport>(Endpoint::parse(endpoint));
}

} // namespace edgefn
