#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dcsim/net_model.hpp"
#include "dcsim/shared_buffer.hpp"
#include "dcsim/sim_core.hpp"

namespace dcsim {

struct Snapshot {
    SimTime t{0};
    std::uint64_t queue_bytes = 0;
    QueueCounters counters;
    PerGroup<std::uint64_t> goodput_bytes;   // cumulative unique bytes delivered
    PerGroup<std::uint64_t> retransmits;     // cumulative retransmitted segments

    bool operator==(const Snapshot&) const = default;
};

struct ExperimentSummary {
    double cubic_share = 0.0;
    std::uint64_t total_drops = 0;
    double avg_buffer = 0.0;
    std::uint64_t max_buffer = 0;
    std::uint64_t total_goodput = 0;
    std::vector<std::uint64_t> per_flow_goodput;
    std::uint64_t marked_ecn = 0;
    Duration duration{0};

    // breakdowns kept alongside the headline metrics
    std::uint64_t dropped_overflow = 0;
    std::uint64_t dropped_red = 0;
    std::uint64_t dctcp_goodput = 0;
    std::uint64_t cubic_goodput = 0;
    std::uint64_t bottleneck_packets = 0; // dequeued onto the bottleneck
    bool zero_goodput = false;           // cubic_share forced to 0

    bool operator==(const ExperimentSummary&) const = default;
};

/// Run-end state that snapshots cannot provide.
struct FinalState {
    QueueCounters counters;
    std::uint64_t max_bytes_seen = 0;
    std::vector<std::uint64_t> per_flow_goodput;
    std::vector<CcKind> per_flow_group;
    Duration duration{0};
};

/// Takes a snapshot at start, then after exponentially distributed gaps
/// (a Poisson process), and once more at the end of the run. With no mean
/// only the start and end snapshots are taken.
class PoissonSampler {
public:
    using Probe = std::function<Snapshot()>;

    PoissonSampler(Simulator& sim, RandomSource rng, std::optional<Duration> mean_interval, Probe probe);
    PoissonSampler(const PoissonSampler&) = delete;
    PoissonSampler& operator=(const PoissonSampler&) = delete;

    void start();
    void finish();

    const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }
    std::vector<Snapshot> take() { return std::move(snapshots_); }

private:
    void sample();

    Simulator& sim_;
    RandomSource rng_;
    std::optional<Duration> mean_;
    Probe probe_;
    std::vector<Snapshot> snapshots_;
};

/// Reduces a run to its outcome metrics. `warmup` excludes early snapshots
/// from the buffer average only.
ExperimentSummary finalize(std::span<const Snapshot> snapshots, const FinalState& final_state,
                           Duration warmup = Duration{0});

} // namespace dcsim
