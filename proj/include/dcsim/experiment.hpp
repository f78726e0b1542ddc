#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcsim/net_model.hpp"
#include "dcsim/shared_buffer.hpp"
#include "dcsim/telemetry.hpp"
#include "dcsim/transport.hpp"

namespace dcsim {

inline constexpr int kSchemaVersion = 1;

/// Everything needed to reproduce one run bit-for-bit.
struct ExperimentConfig {
    NetworkConditions conditions;
    SharedBufferConfig buffer;
    std::uint32_t n_dctcp_senders = 10;
    std::uint32_t n_cubic_senders = 10;
    std::uint32_t flows_per_sender = 10;
    Duration sim_duration = 120s;
    std::optional<Duration> snapshot_mean = 10ms; // nullopt: start/end snapshots only
    std::uint64_t seed = 1;
    int schema_version = kSchemaVersion;

    Duration start_window = 1s;          // flow starts uniform in [0, start_window)
    Duration receiver_link_delay{0};
    std::optional<Duration> host_jitter;  // nullopt: one data-packet serialization at line rate
    std::uint32_t host_queue_limit = 16;  // packets per host NIC; 0 = unbounded
    Duration warmup{0};                  // excluded from avg_buffer
    TransportParams transport;

    std::string validate() const;
    DumbbellSpec dumbbell() const;
    Duration effective_host_jitter() const;

    bool operator==(const ExperimentConfig&) const = default;
};

struct ExperimentResult {
    ExperimentConfig config;
    ExperimentSummary summary;
    std::vector<Snapshot> snapshots;

    bool operator==(const ExperimentResult&) const = default;
};

/// Runs one experiment to completion on the calling thread. Throws
/// std::invalid_argument for an invalid configuration.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Bottleneck busy fraction implied by the summary (data packets only).
double bottleneck_utilization(const ExperimentResult& r);

} // namespace dcsim
