#include "dcsim/telemetry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace dcsim {

PoissonSampler::PoissonSampler(Simulator& sim, RandomSource rng, std::optional<Duration> mean_interval, Probe probe)
    : sim_(sim), rng_(rng), mean_(mean_interval), probe_(std::move(probe))
{
    if (mean_ && *mean_ <= Duration::zero())
        throw std::invalid_argument("PoissonSampler: mean interval must be positive");
}

void PoissonSampler::start()
{
    snapshots_.push_back(probe_());
    if (mean_)
        sim_.schedule(rng_.exponential(*mean_), [this] { sample(); });
}

void PoissonSampler::sample()
{
    snapshots_.push_back(probe_());
    sim_.schedule(rng_.exponential(*mean_), [this] { sample(); });
}

void PoissonSampler::finish()
{
    if (snapshots_.empty() || snapshots_.back().t != sim_.now())
        snapshots_.push_back(probe_());
}

ExperimentSummary finalize(std::span<const Snapshot> snapshots, const FinalState& fs, Duration warmup)
{
    ExperimentSummary s;
    s.duration = fs.duration;
    s.per_flow_goodput = fs.per_flow_goodput;
    s.total_goodput = std::accumulate(fs.per_flow_goodput.begin(), fs.per_flow_goodput.end(), std::uint64_t{0});
    for (std::size_t i = 0; i < fs.per_flow_goodput.size() && i < fs.per_flow_group.size(); ++i) {
        if (fs.per_flow_group[i] == CcKind::Cubic)
            s.cubic_goodput += fs.per_flow_goodput[i];
        else
            s.dctcp_goodput += fs.per_flow_goodput[i];
    }
    if (s.total_goodput == 0) {
        s.cubic_share = 0.0;
        s.zero_goodput = true;
    } else {
        s.cubic_share = static_cast<double>(s.cubic_goodput) / static_cast<double>(s.total_goodput);
    }

    double sum = 0.0;
    std::size_t n = 0;
    for (const Snapshot& snap : snapshots) {
        if (snap.t < warmup)
            continue;
        sum += static_cast<double>(snap.queue_bytes);
        ++n;
    }
    s.avg_buffer = n == 0 ? 0.0 : sum / static_cast<double>(n);

    s.max_buffer = fs.max_bytes_seen;
    s.dropped_overflow = fs.counters.dropped_overflow;
    s.dropped_red = fs.counters.dropped_red;
    s.total_drops = fs.counters.total_drops();
    s.marked_ecn = fs.counters.marked_ecn;
    s.bottleneck_packets = fs.counters.dequeued;
    return s;
}

} // namespace dcsim
