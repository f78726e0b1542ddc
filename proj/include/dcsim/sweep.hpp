#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcsim/archive.hpp"
#include "dcsim/experiment.hpp"

namespace dcsim {

/// Candidate values per configuration dimension. The grid is the Cartesian
/// product of all lists, minus pairs with red_min > red_max.
struct GridSpec {
    std::vector<std::uint64_t> line_rate_bps{1'000'000'000};
    std::vector<Duration> cubic_rtt{25ms};
    std::vector<Duration> dctcp_rtt{200us};
    std::vector<Duration> duration{10s};
    std::vector<std::uint64_t> capacity{1'800'000};
    std::vector<double> drop_prob{0.05};
    std::vector<std::uint32_t> n_dctcp_senders{5};
    std::vector<std::uint32_t> n_cubic_senders{5};
    std::vector<std::uint32_t> flows_per_sender{4};
    std::vector<Duration> receiver_link_delay{Duration{0}};
    std::vector<std::uint64_t> ecn_threshold{100'000};
    std::vector<std::uint64_t> red_min{1'800'000};
    std::vector<std::uint64_t> red_max{1'800'000};

    std::optional<Duration> snapshot_mean = 10ms;
    Duration start_window = 1s;
    double red_avg_weight = 1.0;
    std::uint32_t host_queue_limit = 16; // packets per host NIC, 0 = unbounded
    bool drop_tail_only = false; // keep only red_min == red_max
    std::uint32_t replicates = 1;
    std::uint64_t master_seed = 1;

    std::string validate() const;
};

/// "desk" (laptop scale) or "paper" (the full-scale grid). Throws
/// std::invalid_argument for other names.
GridSpec preset_grid(std::string_view name);

/// Reads a declarative grid. Keys carry their unit (line_rate_mbps,
/// cubic_rtt_ms, dctcp_rtt_us, buffer_kb, ecn_threshold_kb, red_min_kb,
/// red_max_kb, duration_s, receiver_link_delay_us, snapshot_mean_ms,
/// start_window_s, host_queue_limit in packets); a value is a number, a list, or {"from","to","step"}
/// with an inclusive end. An optional "preset" key picks the base grid.
/// Unknown keys are rejected.
GridSpec grid_from_json(const ojson& j);
GridSpec load_grid_file(const std::filesystem::path& path);

/// Deterministic expansion in nested-loop order (ECN, RED min, RED max and
/// replicate vary fastest). Seeds are mix_seed(master_seed, index). Throws
/// std::invalid_argument when the grid is invalid or nothing survives.
std::vector<ExperimentConfig> generate_grid(const GridSpec& spec);

/// exp-NNNNNN-<config hash>.jsonl.gz
std::string archive_name(std::size_t index, const ExperimentConfig& cfg);

struct SweepEntry {
    std::size_t index = 0;
    std::string archive;
    std::string status; // ok, skipped, failed
    double wall_ms = 0.0;
    std::string error;
};

struct SweepOptions {
    std::filesystem::path out_dir;
    unsigned workers = 1;
    std::function<void(const SweepEntry&, std::size_t done, std::size_t total)> on_progress;
};

struct SweepReport {
    std::vector<SweepEntry> entries; // in config order
    std::size_t failed() const;
};

/// Runs every config on a pool of workers, one isolated simulation each.
/// Existing archives are kept and not recomputed. Writes manifest.csv and
/// experiments.csv into out_dir. Experiment failures land in the manifest
/// and do not stop the sweep.
SweepReport run_sweep(const std::vector<ExperimentConfig>& configs, const SweepOptions& opts);

/// One parsed archive, flattened for tables.
struct ExperimentRecord {
    std::size_t index = 0;
    std::string archive;
    ExperimentResult result;
};

/// All *.jsonl.gz archives under `dir`, ordered by file name.
std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir);

/// Names accepted as heatmap axes / filters and as heatmap values.
const std::vector<std::string>& dimension_names();
const std::vector<std::string>& metric_names();
double dimension_value(const ExperimentRecord& r, std::string_view name);
double metric_value(const ExperimentRecord& r, std::string_view name);

/// The per-experiment table consumed downstream: one row per experiment,
/// every dimension then every metric, in base units (bytes, ns, bit/s).
std::string dataset_csv(const std::vector<ExperimentRecord>& records);

struct Filter {
    std::string dim;
    double value = 0.0;
};

/// Parses "dim=value"; throws std::invalid_argument on bad syntax or an
/// unknown dimension.
Filter parse_filter(std::string_view text);

struct HeatmapCell {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0; // mean over matching experiments
    std::size_t n = 0;
};

/// Long-format table, one cell per distinct (x, y), sorted by x then y.
/// Throws std::invalid_argument for unknown names.
std::vector<HeatmapCell> heatmap_table(const std::vector<ExperimentRecord>& records, std::string_view x,
                                       std::string_view y, std::string_view z, const std::vector<Filter>& filters);
std::string heatmap_csv(const std::vector<HeatmapCell>& cells, std::string_view x, std::string_view y,
                        std::string_view z);

/// Shortest decimal that reads back to the same double.
std::string format_number(double v);

} // namespace dcsim
