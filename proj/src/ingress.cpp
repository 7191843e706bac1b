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

#include "edgefn/ingress.hpp"

#include <algorithm>
#include <cstring>

#include "edgefn/error.hpp"

namespace edgefn {

using namespace std::chrono_literals;

// --- RingBuffer ------------------------------------------------------------

RingBuffer::RingBuffer(std::size_t capacity, std::size_t max_record_bytes)
    : capacity_(capacity), words_per_cell_((max_record_bytes + 7) / 8) {
    if (capacity == 0) throw Error(Errc::invalid_argument, "ring capacity must be positive");
    cells_ = std::make_unique<Cell[]>(capacity_);
    words_ = std::make_unique<std::atomic<std::uint64_t>[]>(capacity_ * words_per_cell_);
}

bool RingBuffer::write(std::uint64_t seq, Nanos source_ts, ByteView payload) {
    if (payload.size() > words_per_cell_ * 8) return false;
    const std::uint64_t ticket = head_.fetch_add(1, std::memory_order_relaxed);
    Cell& cell = cells_[ticket % capacity_];
    // A cell version of 2*(t+1) means ticket t is fully written; odd means in progress.
    const std::uint64_t prior = ticket >= capacity_ ? 2 * (ticket - capacity_ + 1) : 0;
    while (cell.version.load(std::memory_order_acquire) != prior) {
        // Only reachable when several producers lap each other on one ring.
        std::this_thread::yield();
    }
    cell.version.store(2 * ticket + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);

    cell.seq.store(seq, std::memory_order_relaxed);
    cell.ts.store(source_ts, std::memory_order_relaxed);
    cell.length.store(static_cast<std::uint32_t>(payload.size()), std::memory_order_relaxed);
    auto* words = &words_[(ticket % capacity_) * words_per_cell_];
    for (std::size_t w = 0; w * 8 < payload.size(); ++w) {
        std::uint64_t v = 0;
        std::memcpy(&v, payload.data() + w * 8, std::min<std::size_t>(8, payload.size() - w * 8));
        words[w].store(v, std::memory_order_relaxed);
    }
    cell.version.store(2 * ticket + 2, std::memory_order_release);

    std::uint64_t c = committed_.load(std::memory_order_relaxed);
    while (c < ticket + 1 &&
           !committed_.compare_exchange_weak(c, ticket + 1, std::memory_order_release,
                                             std::memory_order_relaxed)) {
    }
    return true;
}

std::optional<RingRecord> RingBuffer::read_ticket(std::uint64_t ticket) const {
    const Cell& cell = cells_[ticket % capacity_];
    const auto* words = &words_[(ticket % capacity_) * words_per_cell_];
    const std::uint64_t expect = 2 * ticket + 2;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::uint64_t v1 = cell.version.load(std::memory_order_acquire);
        if (v1 != expect) {
            if (v1 > expect) return std::nullopt;  // already overwritten
            continue;                             // still being written
        }
        RingRecord rec;
        rec.seq = cell.seq.load(std::memory_order_relaxed);
        rec.source_ts = cell.ts.load(std::memory_order_relaxed);
        const std::uint32_t len =
            std::min<std::uint32_t>(cell.length.load(std::memory_order_relaxed),
                                    static_cast<std::uint32_t>(words_per_cell_ * 8));
        rec.payload.resize(len);
        for (std::size_t w = 0; w * 8 < len; ++w) {
            const std::uint64_t v = words[w].load(std::memory_order_relaxed);
            std::memcpy(rec.payload.data() + w * 8, &v, std::min<std::size_t>(8, len - w * 8));
        }
        std::atomic_thread_fence(std::memory_order_acquire);
        if (cell.version.load(std::memory_order_relaxed) == v1) return rec;
    }
    return std::nullopt;
}

std::optional<RingRecord> RingBuffer::latest() const {
    std::uint64_t end = committed_.load(std::memory_order_acquire);
    while (end > 0) {
        if (auto rec = read_ticket(end - 1)) return rec;
        // Overwritten mid-read: a newer record exists.
        const std::uint64_t now = committed_.load(std::memory_order_acquire);
        if (now == end) return std::nullopt;
        end = now;
    }
    return std::nullopt;
}

std::vector<RingRecord> RingBuffer::window(std::size_t n) const {
    const std::uint64_t end = committed_.load(std::memory_order_acquire);
    const std::uint64_t span = std::min<std::uint64_t>({n, capacity_, end});
    std::vector<RingRecord> out;
    out.reserve(span);
    for (std::uint64_t t = end - span; t < end; ++t)
        if (auto rec = read_ticket(t)) out.push_back(std::move(*rec));
    return out;
}

// --- SlotLease -------------------------------------------------------------

SlotLease& SlotLease::operator=(SlotLease&& other) noexcept {
    if (this != &other) {
        release();
        pool_ = std::move(other.pool_);
        slot_ = other.slot_;
        length_ = other.length_;
        seq_ = other.seq_;
        source_ts_ = other.source_ts_;
    }
    return *this;
}

SlotLease SlotLease::clone() const {
    SlotLease copy;
    if (!pool_) return copy;
    pool_->slots_[slot_].state.fetch_add(1, std::memory_order_acq_rel);
    copy.pool_ = pool_;
    copy.slot_ = slot_;
    copy.length_ = length_;
    copy.seq_ = seq_;
    copy.source_ts_ = source_ts_;
    return copy;
}

void SlotLease::release() noexcept {
    if (pool_) {
        pool_->release(slot_);
        pool_.reset();
    }
}

ByteView SlotLease::data() const noexcept {
    if (!pool_) return {};
    return ByteView(pool_->storage_.data() + std::size_t(slot_) * pool_->slot_size_, length_);
}

// --- SlotPool --------------------------------------------------------------

std::shared_ptr<SlotPool> SlotPool::create(std::size_t slot_size, std::size_t slot_count) {
    return std::shared_ptr<SlotPool>(new SlotPool(slot_size, slot_count));
}

SlotPool::SlotPool(std::size_t slot_size, std::size_t slot_count)
    : slot_size_(slot_size), slot_count_(slot_count) {
    if (slot_size == 0 || slot_count == 0)
        throw Error(Errc::invalid_argument, "slot pool needs positive slot size and count");
    if (slot_count > 0xFFFF'FFFEu) throw Error(Errc::invalid_argument, "too many slots");
    storage_.resize(slot_size_ * slot_count_);
    slots_ = std::make_unique<Slot[]>(slot_count_);
}

void SlotPool::bump_counters(bool stored, bool oversize) {
    // Single writer; readers use the version as a sequence lock so the three
    // counters are always observed together.
    counter_version_.fetch_add(1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
    ingested_.fetch_add(1, std::memory_order_relaxed);
    if (stored) {
        stored_.fetch_add(1, std::memory_order_relaxed);
    } else {
        dropped_.fetch_add(1, std::memory_order_relaxed);
        if (oversize) oversize_.fetch_add(1, std::memory_order_relaxed);
    }
    counter_version_.fetch_add(1, std::memory_order_release);
}

PoolCounters SlotPool::counters() const {
    for (;;) {
        const std::uint64_t v1 = counter_version_.load(std::memory_order_acquire);
        if (v1 & 1) {
            std::this_thread::yield();
            continue;
        }
        PoolCounters c{ingested_.load(std::memory_order_relaxed), stored_.load(std::memory_order_relaxed),
                       dropped_.load(std::memory_order_relaxed), oversize_.load(std::memory_order_relaxed)};
        std::atomic_thread_fence(std::memory_order_acquire);
        if (counter_version_.load(std::memory_order_relaxed) == v1) return c;
    }
}

bool SlotPool::ingest(ByteView frame, std::uint64_t seq, Nanos source_ts) {
    if (frame.size() > slot_size_) {
        bump_counters(false, true);
        return false;
    }
    std::optional<std::uint32_t> chosen;
    for (std::size_t probe = 0; probe < slot_count_ && !chosen; ++probe) {
        const std::uint32_t idx = (next_probe_ + probe) % slot_count_;
        std::uint64_t s = slots_[idx].state.load(std::memory_order_acquire);
        if ((s & 0xFFFF'FFFFu) != 0) continue;
        const std::uint64_t claimed = ((s >> 32) + 1) << 32 | 1u;
        if (slots_[idx].state.compare_exchange_strong(s, claimed, std::memory_order_acq_rel))
            chosen = idx;
    }
    if (!chosen) {
        bump_counters(false, false);
        return false;
    }
    const std::uint32_t idx = *chosen;
    next_probe_ = (idx + 1) % slot_count_;
    Slot& slot = slots_[idx];
    std::memcpy(storage_.data() + std::size_t(idx) * slot_size_, frame.data(), frame.size());
    slot.length = static_cast<std::uint32_t>(frame.size());
    slot.seq = seq;
    slot.source_ts = source_ts;
    const std::uint64_t generation = slot.state.load(std::memory_order_relaxed) >> 32;

    // The pool's own lease (count 1 taken above) moves to the new frame; the
    // previous newest frame loses it.
    const std::uint64_t prev =
        latest_.exchange((generation << 32) | (idx + 1), std::memory_order_acq_rel);
    bump_counters(true, false);
    if (prev != 0) release(static_cast<std::uint32_t>((prev & 0xFFFF'FFFFu) - 1));
    return true;
}

bool SlotPool::try_acquire_existing(std::uint32_t slot, std::uint32_t generation) {
    auto& state = slots_[slot].state;
    std::uint64_t s = state.load(std::memory_order_acquire);
    for (;;) {
        if ((s >> 32) != generation || (s & 0xFFFF'FFFFu) == 0) return false;
        if (state.compare_exchange_weak(s, s + 1, std::memory_order_acq_rel)) return true;
    }
}

std::optional<SlotLease> SlotPool::latest() {
    for (;;) {
        const std::uint64_t cur = latest_.load(std::memory_order_acquire);
        if (cur == 0) return std::nullopt;
        const auto idx = static_cast<std::uint32_t>((cur & 0xFFFF'FFFFu) - 1);
        const auto gen = static_cast<std::uint32_t>(cur >> 32);
        if (!try_acquire_existing(idx, gen)) continue;  // slot recycled under us; reload
        SlotLease lease;
        lease.pool_ = shared_from_this();
        lease.slot_ = idx;
        lease.length_ = slots_[idx].length;
        lease.seq_ = slots_[idx].seq;
        lease.source_ts_ = slots_[idx].source_ts;
        return lease;
    }
}

void SlotPool::release(std::uint32_t slot) noexcept {
    slots_[slot].state.fetch_sub(1, std::memory_order_acq_rel);
}

std::uint32_t SlotPool::lease_count(std::size_t slot) const {
    return static_cast<std::uint32_t>(slots_[slot].state.load(std::memory_order_acquire) & 0xFFFF'FFFFu);
}

std::uint64_t SlotPool::total_leases() const {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < slot_count_; ++i) total += lease_count(i);
    return total;
}

// --- IngressHub ------------------------------------------------------------

std::string_view channel_class_name(ChannelClass c) noexcept {
    return c == ChannelClass::high_volume ? "high_volume" : "low_volume";
}

ChannelClass channel_class_from_name(std::string_view name) {
    if (name == "high_volume") return ChannelClass::high_volume;
    if (name == "low_volume") return ChannelClass::low_volume;
    throw Error(Errc::invalid_argument, "unknown channel class '" + std::string(name) + "'");
}

IngressHub::IngressHub(std::optional<std::string> trigger_topic)
    : trigger_topic_(std::move(trigger_topic)) {}

IngressHub::~IngressHub() { stop(); }

void IngressHub::stop() {
    if (stopping_.exchange(true)) return;
    std::unique_lock lk(channels_mu_);
    for (auto& [name, ch] : channels_)
        if (ch->receiver.joinable()) ch->receiver.join();
    lk.unlock();
    interrupt();
}

std::size_t IngressHub::attach(Subscription sub, ChannelClass cls, std::size_t depth_or_slots,
                               std::size_t slot_size, std::size_t max_record_bytes) {
    if (!sub) throw Error(Errc::invalid_argument, "attach needs a live subscription");
    if (depth_or_slots == 0) throw Error(Errc::invalid_argument, "depth/slots must be positive");
    std::unique_lock lk(channels_mu_);
    const std::string topic = sub.topic();
    if (channels_.count(topic))
        throw Error(Errc::duplicate_topic, "topic '" + topic + "' already attached");
    auto ch = std::make_unique<Channel>();
    ch->topic = topic;
    ch->cls = cls;
    ch->sub = std::move(sub);
    ch->is_trigger = trigger_topic_ && *trigger_topic_ == topic;
    if (cls == ChannelClass::low_volume)
        ch->ring = std::make_unique<RingBuffer>(depth_or_slots, max_record_bytes);
    else
        ch->pool = SlotPool::create(slot_size, depth_or_slots);
    Channel& ref = *ch;
    channels_.emplace(topic, std::move(ch));
    ref.receiver = std::thread([this, &ref] { receive(ref); });
    return channels_.size() - 1;
}

void IngressHub::receive(Channel& ch) {
    while (!stopping_.load(std::memory_order_relaxed)) {
        auto env = ch.sub.pop(20ms);
        if (!env) {
            if (ch.sub.closed()) break;
            continue;
        }
        ch.arrivals.fetch_add(1, std::memory_order_relaxed);
        bool stored;
        if (ch.ring)
            stored = ch.ring->write(env->seq, env->source_ts, env->bytes());
        else
            stored = ch.pool->ingest(env->bytes(), env->seq, env->source_ts);
        if (!stored) ch.dropped.fetch_add(1, std::memory_order_relaxed);
        if (ch.is_trigger) {
            trigger_arrivals_.fetch_add(1, std::memory_order_relaxed);
            {
                std::lock_guard lk(trigger_mu_);
                ++pending_;
                pending_seq_ = env->seq;
                pending_ts_ = env->source_ts;
            }
            trigger_cv_.notify_one();
        }
    }
}

IngressHub::Channel& IngressHub::channel(std::string_view topic) const {
    std::shared_lock lk(channels_mu_);
    auto it = channels_.find(topic);
    if (it == channels_.end())
        throw Error(Errc::unknown_topic, "topic '" + std::string(topic) + "' not attached");
    return *it->second;
}

bool IngressHub::has_topic(std::string_view topic) const {
    std::shared_lock lk(channels_mu_);
    return channels_.find(topic) != channels_.end();
}

std::optional<LatestItem> IngressHub::latest(std::string_view topic) {
    Channel& ch = channel(topic);
    if (ch.ring) {
        if (auto rec = ch.ring->latest()) return LatestItem(std::move(*rec));
        return std::nullopt;
    }
    if (auto lease = ch.pool->latest()) return LatestItem(std::move(*lease));
    return std::nullopt;
}

std::vector<RingRecord> IngressHub::window(std::string_view topic, std::size_t n) {
    Channel& ch = channel(topic);
    if (!ch.ring)
        throw Error(Errc::wrong_class, "topic '" + std::string(topic) + "' is high volume; use latest()");
    if (n == 0) throw Error(Errc::invalid_argument, "window size must be positive");
    return ch.ring->window(n);
}

TriggerWakeup IngressHub::await_trigger(std::chrono::nanoseconds timeout) {
    if (!trigger_topic_) throw Error(Errc::no_trigger_topic, "hub has no trigger topic");
    std::unique_lock lk(trigger_mu_);
    trigger_cv_.wait_for(lk, timeout, [&] { return pending_ > 0 || interrupted_; });
    interrupted_ = false;
    TriggerWakeup w;
    if (pending_ == 0) return w;
    w.kind = TriggerWakeup::Kind::triggered;
    w.count = pending_;
    w.cause_seq = pending_seq_;
    w.cause_source_ts = pending_ts_;
    pending_ = 0;
    return w;
}

void IngressHub::interrupt() {
    {
        std::lock_guard lk(trigger_mu_);
        interrupted_ = true;
    }
    trigger_cv_.notify_all();
}

std::shared_ptr<SlotPool> IngressHub::pool(std::string_view topic) const {
    return channel(topic).pool;
}

std::vector<ChannelCounters> IngressHub::counters() const {
    std::shared_lock lk(channels_mu_);
    std::vector<ChannelCounters> out;
    for (const auto& [name, ch] : channels_)
        out.push_back({name, ch->cls, ch->arrivals.load(), ch->dropped.load(), ch->sub.dropped()});
    return out;
}

} // namespace edgefn
