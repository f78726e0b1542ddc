#pragma once

#include <cstdint>
#include <deque>
#include <string>

#include "dcsim/packet.hpp"
#include "dcsim/sim_core.hpp"

namespace dcsim {

/// Switch buffer settings. All thresholds are byte quantities compared
/// against the number of wire bytes already queued.
struct SharedBufferConfig {
    std::uint64_t capacity = 1'800'000;
    std::uint64_t ecn_threshold = 0;
    std::uint64_t red_min = 1'800'000;
    std::uint64_t red_max = 1'800'000;
    double max_drop_prob = 0.05;
    double avg_weight = 1.0; // 1.0: RED looks at the instantaneous queue

    /// Empty string when valid, otherwise a description of the first problem.
    std::string validate() const;

    bool operator==(const SharedBufferConfig&) const = default;
};

struct QueueCounters {
    std::uint64_t enqueued = 0;
    std::uint64_t dequeued = 0;
    std::uint64_t dropped_overflow = 0;
    std::uint64_t dropped_red = 0;
    std::uint64_t marked_ecn = 0;

    std::uint64_t total_drops() const noexcept { return dropped_overflow + dropped_red; }
    bool operator==(const QueueCounters&) const = default;
};

enum class Verdict { Enqueued, EnqueuedMarked, DroppedOverflow, DroppedRed };

const char* to_string(Verdict v) noexcept;

/// Piecewise-linear RED drop curve: 0 below red_min, rising to max_drop_prob
/// at red_max, then 1 at and above red_max. With red_min == red_max it is a
/// hard step at that threshold.
double red_drop_probability(double avg_queue, const SharedBufferConfig& cfg) noexcept;

/// One FIFO shared by both traffic classes. ECT arrivals are CE-marked when
/// the queue they find is at or above the ECN threshold; non-ECT arrivals
/// go through RED. Every arrival is subject to the hard capacity bound.
class SharedBufferQueue {
public:
    explicit SharedBufferQueue(SharedBufferConfig cfg);

    /// Marking/dropping happens here, at arrival. The packet's CE bit is set
    /// in place when it is marked.
    Verdict enqueue(Packet& pkt, RandomSource& rng);

    /// Removes the FIFO head. Returns false when the queue is empty.
    bool dequeue(Packet& out);

    const SharedBufferConfig& config() const noexcept { return cfg_; }
    const QueueCounters& counters() const noexcept { return counters_; }
    std::uint64_t bytes_queued() const noexcept { return bytes_queued_; }
    std::uint64_t max_bytes_seen() const noexcept { return max_bytes_seen_; }
    double avg_queue() const noexcept { return avg_queue_; }
    std::size_t packets_queued() const noexcept { return fifo_.size(); }
    bool empty() const noexcept { return fifo_.empty(); }

private:
    SharedBufferConfig cfg_;
    std::deque<Packet> fifo_;
    std::uint64_t bytes_queued_ = 0;
    std::uint64_t max_bytes_seen_ = 0;
    double avg_queue_ = 0.0;
    QueueCounters counters_;
};

} // namespace dcsim
