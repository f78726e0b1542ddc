#include "dcsim/shared_buffer.hpp"

#include <cassert>

namespace dcsim {

std::string SharedBufferConfig::validate() const
{
    if (ecn_threshold > capacity)
        return "ecn_threshold exceeds capacity";
    if (red_min > red_max)
        return "red_min exceeds red_max";
    if (red_max > capacity)
        return "red_max exceeds capacity";
    if (!(max_drop_prob >= 0.0 && max_drop_prob <= 1.0))
        return "max_drop_prob outside [0, 1]";
    if (!(avg_weight > 0.0 && avg_weight <= 1.0))
        return "avg_weight outside (0, 1]";
    return {};
}

const char* to_string(Verdict v) noexcept
{
    switch (v) {
    case Verdict::Enqueued: return "enqueued";
    case Verdict::EnqueuedMarked: return "enqueued_marked";
    case Verdict::DroppedOverflow: return "dropped_overflow";
    case Verdict::DroppedRed: return "dropped_red";
    }
    return "?";
}

double red_drop_probability(double avg_queue, const SharedBufferConfig& cfg) noexcept
{
    const auto lo = static_cast<double>(cfg.red_min);
    const auto hi = static_cast<double>(cfg.red_max);
    if (avg_queue < lo)
        return 0.0;
    if (avg_queue >= hi)
        return 1.0;
    return cfg.max_drop_prob * (avg_queue - lo) / (hi - lo);
}

SharedBufferQueue::SharedBufferQueue(SharedBufferConfig cfg) : cfg_(cfg) {}

Verdict SharedBufferQueue::enqueue(Packet& pkt, RandomSource& rng)
{
    if (bytes_queued_ + pkt.wire_len > cfg_.capacity) {
        ++counters_.dropped_overflow;
        return Verdict::DroppedOverflow;
    }

    Verdict verdict = Verdict::Enqueued;
    if (pkt.ect) {
        if (bytes_queued_ >= cfg_.ecn_threshold) {
            pkt.ce = true;
            ++counters_.marked_ecn;
            verdict = Verdict::EnqueuedMarked;
        }
    } else {
        pkt.ce = false;
        const double w = cfg_.avg_weight;
        avg_queue_ = (1.0 - w) * avg_queue_ + w * static_cast<double>(bytes_queued_);
        const double p = red_drop_probability(avg_queue_, cfg_);
        // no draw outside the linear region, so the stream only advances on
        // genuinely random decisions
        const bool drop = p >= 1.0 || (p > 0.0 && rng.bernoulli(p));
        if (drop) {
            ++counters_.dropped_red;
            return Verdict::DroppedRed;
        }
    }

    bytes_queued_ += pkt.wire_len;
    if (bytes_queued_ > max_bytes_seen_)
        max_bytes_seen_ = bytes_queued_;
    ++counters_.enqueued;
    fifo_.push_back(pkt);
    assert(bytes_queued_ <= cfg_.capacity);
    return verdict;
}

bool SharedBufferQueue::dequeue(Packet& out)
{
    if (fifo_.empty())
        return false;
    out = fifo_.front();
    fifo_.pop_front();
    bytes_queued_ -= out.wire_len;
    ++counters_.dequeued;
    return true;
}

} // namespace dcsim
