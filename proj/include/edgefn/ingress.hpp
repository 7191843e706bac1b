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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "edgefn/bytes.hpp"
#include "edgefn/clock.hpp"
#include "edgefn/transport.hpp"

namespace edgefn {

// A value copy of one low-volume message.
struct RingRecord {
    std::uint64_t seq = 0;
    Nanos source_ts = 0;
    Bytes payload;
};

// Overwriting ring of the newest `capacity` records. Each cell is guarded by a
// sequence lock, so writers never wait for readers and readers never block
// writers; a reader that races an overwrite retries once and then skips the
// record. Payload words are copied through relaxed atomics to keep the racy
// read well-defined.
class RingBuffer {
public:
    RingBuffer(std::size_t capacity, std::size_t max_record_bytes);
    RingBuffer(const RingBuffer&) = delete;
    RingBuffer& operator=(const RingBuffer&) = delete;

    // False when the payload exceeds max_record_bytes (nothing is written).
    bool write(std::uint64_t seq, Nanos source_ts, ByteView payload);

    std::optional<RingRecord> latest() const;
    // Up to n newest records, oldest first.
    std::vector<RingRecord> window(std::size_t n) const;

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t max_record_bytes() const noexcept { return words_per_cell_ * 8; }
    std::uint64_t written() const noexcept { return committed_.load(std::memory_order_acquire); }

private:
    struct Cell {
        std::atomic<std::uint64_t> version{0};
        std::atomic<std::uint64_t> seq{0};
        std::atomic<std::int64_t> ts{0};
        std::atomic<std::uint32_t> length{0};
    };

    std::optional<RingRecord> read_ticket(std::uint64_t ticket) const;

    std::size_t capacity_;
    std::size_t words_per_cell_;
    std::unique_ptr<Cell[]> cells_;
    std::unique_ptr<std::atomic<std::uint64_t>[]> words_;
    std::atomic<std::uint64_t> head_{0};
    std::atomic<std::uint64_t> committed_{0};
};

class SlotPool;

// Shared, read-only handle on one pool slot. The slot cannot be reused while
// any lease on it is alive.
class SlotLease {
public:
    SlotLease() = default;
    SlotLease(SlotLease&& other) noexcept { *this = std::move(other); }
    SlotLease& operator=(SlotLease&& other) noexcept;
    SlotLease(const SlotLease&) = delete;
    SlotLease& operator=(const SlotLease&) = delete;
    ~SlotLease() { release(); }

    // Grants an additional lease on the same slot.
    SlotLease clone() const;
    void release() noexcept;

    ByteView data() const noexcept;
    std::uint32_t slot() const noexcept { return slot_; }
    std::uint32_t length() const noexcept { return length_; }
    std::uint64_t seq() const noexcept { return seq_; }
    Nanos source_ts() const noexcept { return source_ts_; }
    bool valid() const noexcept { return static_cast<bool>(pool_); }

private:
    friend class SlotPool;
    std::shared_ptr<SlotPool> pool_;
    std::uint32_t slot_ = 0;
    std::uint32_t length_ = 0;
    std::uint64_t seq_ = 0;
    Nanos source_ts_ = 0;
};

struct PoolCounters {
    std::uint64_t frames_ingested = 0;
    std::uint64_t leases_granted_for_new_frames = 0;
    std::uint64_t drop_count = 0;
    std::uint64_t oversize = 0;
};

// Fixed set of pre-allocated frame slots with per-slot lease counts. All slot
// memory is allocated in the constructor. ingest() is single-producer; latest()
// and lease release may run on any thread.
class SlotPool : public std::enable_shared_from_this<SlotPool> {
public:
    static std::shared_ptr<SlotPool> create(std::size_t slot_size, std::size_t slot_count);

    // Copies the frame into a free slot, making it the newest frame. Returns
    // false (and counts a drop) when the frame is too large or no slot is free.
    bool ingest(ByteView frame, std::uint64_t seq, Nanos source_ts);

    std::optional<SlotLease> latest();

    PoolCounters counters() const;
    std::uint32_t lease_count(std::size_t slot) const;
    std::size_t slot_size() const noexcept { return slot_size_; }
    std::size_t slot_count() const noexcept { return slot_count_; }
    // Sum of all outstanding lease counts, including the pool's own hold on
    // the newest frame.
    std::uint64_t total_leases() const;

private:
    friend class SlotLease;
    SlotPool(std::size_t slot_size, std::size_t slot_count);

    struct Slot {
        // High 32 bits: generation, bumped on every reuse. Low 32 bits: lease count.
        std::atomic<std::uint64_t> state{0};
        std::uint32_t length = 0;
        std::uint64_t seq = 0;
        Nanos source_ts = 0;
    };

    bool try_acquire_existing(std::uint32_t slot, std::uint32_t generation);
    void release(std::uint32_t slot) noexcept;
    void bump_counters(bool stored, bool oversize);

    std::size_t slot_size_;
    std::size_t slot_count_;
    std::vector<std::uint8_t> storage_;
    std::unique_ptr<Slot[]> slots_;
    // (generation << 32) | (slot + 1); zero before the first frame.
    std::atomic<std::uint64_t> latest_{0};
    std::uint32_t next_probe_ = 0;

    std::atomic<std::uint64_t> counter_version_{0};
    std::atomic<std::uint64_t> ingested_{0};
    std::atomic<std::uint64_t> stored_{0};
    std::atomic<std::uint64_t> dropped_{0};
    std::atomic<std::uint64_t> oversize_{0};
};

enum class ChannelClass { high_volume, low_volume };

std::string_view channel_class_name(ChannelClass c) noexcept;
ChannelClass channel_class_from_name(std::string_view name);

using LatestItem = std::variant<RingRecord, SlotLease>;

struct TriggerWakeup {
    enum class Kind { triggered, timed_out } kind = Kind::timed_out;
    std::uint64_t count = 0;
    // Newest trigger envelope represented by this wakeup.
    std::uint64_t cause_seq = 0;
    Nanos cause_source_ts = 0;

    bool triggered() const noexcept { return kind == Kind::triggered; }
};

struct ChannelCounters {
    std::string topic;
    ChannelClass cls = ChannelClass::low_volume;
    std::uint64_t arrivals = 0;
    std::uint64_t dropped = 0;
    std::uint64_t transport_dropped = 0;
};

struct IngressDefaults {
    static constexpr std::size_t low_volume_depth = 256;
    static constexpr std::size_t high_volume_slots = 8;
    static constexpr std::size_t slot_size = 8u << 20;
    static constexpr std::size_t max_record_bytes = 1024;
};

// Per-function staging area between transport receivers and the single
// execution thread. Each attached subscription gets a receiver thread that
// copies arrivals into a ring (low volume) or slot pool (high volume). Arrivals
// on the trigger topic raise a coalescing wakeup.
class IngressHub {
public:
    explicit IngressHub(std::optional<std::string> trigger_topic = std::nullopt);
    ~IngressHub();
    IngressHub(const IngressHub&) = delete;
    IngressHub& operator=(const IngressHub&) = delete;

    // depth_or_slots is the ring capacity (low volume) or slot count (high volume).
    std::size_t attach(Subscription sub, ChannelClass cls, std::size_t depth_or_slots,
                       std::size_t slot_size = IngressDefaults::slot_size,
                       std::size_t max_record_bytes = IngressDefaults::max_record_bytes);

    std::optional<LatestItem> latest(std::string_view topic);
    std::vector<RingRecord> window(std::string_view topic, std::size_t n);
    TriggerWakeup await_trigger(std::chrono::nanoseconds timeout);

    // Wakes a blocked await_trigger without reporting an arrival.
    void interrupt();
    void stop();

    const std::optional<std::string>& trigger_topic() const noexcept { return trigger_topic_; }
    bool has_topic(std::string_view topic) const;
    std::shared_ptr<SlotPool> pool(std::string_view topic) const;
    std::vector<ChannelCounters> counters() const;
    std::uint64_t trigger_arrivals() const noexcept { return trigger_arrivals_.load(); }

private:
    struct Channel {
        std::string topic;
        ChannelClass cls;
        Subscription sub;
        std::unique_ptr<RingBuffer> ring;
        std::shared_ptr<SlotPool> pool;
        bool is_trigger = false;
        std::atomic<std::uint64_t> arrivals{0};
        std::atomic<std::uint64_t> dropped{0};
        std::thread receiver;
    };

    void receive(Channel& ch);
    Channel& channel(std::string_view topic) const;

    std::optional<std::string> trigger_topic_;
    mutable std::shared_mutex channels_mu_;
    std::map<std::string, std::unique_ptr<Channel>, std::less<>> channels_;
    std::atomic<bool> stopping_{false};

    std::mutex trigger_mu_;
    std::condition_variable trigger_cv_;
    std::uint64_t pending_ = 0;
    std::uint64_t pending_seq_ = 0;
    Nanos pending_ts_ = 0;
    bool interrupted_ = false;
    std::atomic<std::uint64_t> trigger_arrivals_{0};
};

} // namespace edgefn
