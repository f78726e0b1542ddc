#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <string_view>
#include <vector>

namespace dcsim {

// All simulated time is integer nanoseconds since the start of the run.
using Duration = std::chrono::nanoseconds;
using SimTime = std::chrono::nanoseconds;

using namespace std::chrono_literals;

constexpr double to_seconds(Duration d) noexcept
{
    return std::chrono::duration<double>(d).count();
}

inline Duration from_seconds(double s) noexcept
{
    return Duration{std::llround(s * 1e9)};
}

struct EventHandle {
    std::uint32_t slot = UINT32_MAX;
    std::uint64_t seq = 0;
};

/// Single-threaded discrete-event engine.
///
/// Events fire in (fire_at, seq) order where seq is the insertion counter, so
/// two events scheduled for the same instant run in the order they were
/// scheduled. Cancellation is lazy: the heap entry stays until popped.
class Simulator {
public:
    using Action = std::function<void()>;

    SimTime now() const noexcept { return now_; }

    EventHandle schedule(Duration delay, Action action);
    EventHandle schedule_at(SimTime at, Action action);
    void cancel(EventHandle h);

    /// Runs every event with fire_at <= end and returns the number executed.
    /// The clock reads `end` afterwards, including when the queue drained
    /// early.
    std::uint64_t run_until(SimTime end);

    std::size_t pending() const noexcept { return live_; }

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        std::uint32_t slot;

        bool operator>(const Entry& o) const noexcept
        {
            return at != o.at ? at > o.at : seq > o.seq;
        }
    };
    struct Slot {
        Action action;
        std::uint64_t seq = 0;
        bool armed = false;
    };

    std::uint32_t acquire_slot();

    SimTime now_{0};
    std::uint64_t next_seq_ = 0;
    std::size_t live_ = 0;
    bool running_ = false;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap_;
    std::vector<Slot> slots_;
    std::vector<std::uint32_t> free_slots_;
};

/// Seeded 64-bit random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the conversions to uniform and
/// exponential variates are done here rather than through <random>
/// distributions, whose algorithms are implementation-defined.
class RandomSource {
public:
    static constexpr std::string_view kGenerator = "mt19937_64";

    explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream keyed by name; the parent's state is untouched.
    RandomSource fork(std::string_view name) const;

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform01();

    /// Uniform in [lo, hi); returns lo when lo == hi.
    double uniform(double lo, double hi);

    /// Exponential with the given mean, rounded to whole nanoseconds and
    /// never below 1 ns.
    Duration exponential(Duration mean);

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

} // namespace dcsim
