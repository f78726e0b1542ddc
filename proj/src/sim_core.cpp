#include "dcsim/sim_core.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace dcsim {

std::uint32_t Simulator::acquire_slot()
{
    if (!free_slots_.empty()) {
        auto s = free_slots_.back();
        free_slots_.pop_back();
        return s;
    }
    slots_.emplace_back();
    return static_cast<std::uint32_t>(slots_.size() - 1);
}

EventHandle Simulator::schedule(Duration delay, Action action)
{
    if (delay < Duration::zero())
        throw std::invalid_argument("Simulator::schedule: negative delay");
    return schedule_at(now_ + delay, std::move(action));
}

EventHandle Simulator::schedule_at(SimTime at, Action action)
{
    if (at < now_)
        throw std::invalid_argument("Simulator::schedule_at: time in the past");
    auto slot = acquire_slot();
    auto seq = next_seq_++;
    Slot& s = slots_[slot];
    s.action = std::move(action);
    s.seq = seq;
    s.armed = true;
    heap_.push(Entry{at, seq, slot});
    ++live_;
    return EventHandle{slot, seq};
}

void Simulator::cancel(EventHandle h)
{
    if (h.slot >= slots_.size())
        return;
    Slot& s = slots_[h.slot];
    if (!s.armed || s.seq != h.seq)
        return;
    s.armed = false;
    s.action = nullptr;
    --live_;
    // the slot is recycled when its heap entry is popped
}

std::uint64_t Simulator::run_until(SimTime end)
{
    if (running_)
        throw std::logic_error("Simulator::run_until: already running");
    running_ = true;
    std::uint64_t executed = 0;
    while (!heap_.empty() && heap_.top().at <= end) {
        Entry e = heap_.top();
        heap_.pop();
        Slot& s = slots_[e.slot];
        if (s.seq != e.seq) {
            // stale entry for a slot that has been reused
            continue;
        }
        bool armed = s.armed;
        Action action = std::move(s.action);
        s.action = nullptr;
        s.armed = false;
        free_slots_.push_back(e.slot);
        if (!armed)
            continue;
        --live_;
        assert(e.at >= now_);
        now_ = e.at;
        action();
        ++executed;
    }
    if (end > now_)
        now_ = end;
    running_ = false;
    return executed;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RandomSource RandomSource::fork(std::string_view name) const
{
    return RandomSource(mix_seed(seed_, fnv1a64(name)));
}

double RandomSource::uniform01()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi)
{
    if (lo == hi)
        return lo;
    double v = lo + (hi - lo) * uniform01();
    return v < hi ? v : lo;
}

Duration RandomSource::exponential(Duration mean)
{
    // open interval (0, 1) so the log is finite and the sample positive
    double u = (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
    double ns = -std::log(u) * static_cast<double>(mean.count());
    auto r = std::llround(ns);
    return Duration{r < 1 ? 1 : r};
}

} // namespace dcsim
