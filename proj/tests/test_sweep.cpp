#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dcsim/sweep.hpp"

using namespace dcsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name)
{
    auto d = fs::temp_directory_path() / ("dcsim-sweep-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(d);
    return d;
}

GridSpec tiny_grid()
{
    return grid_from_json(ojson::parse(R"({
        "duration_s": 0.2, "start_window_s": 0.02,
        "n_dctcp_senders": 1, "n_cubic_senders": 1, "flows_per_sender": 2,
        "ecn_threshold_kb": [20, 100], "red_min_kb": [900, 1800], "red_max_kb": 1800
    })"));
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> csv_lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

ExperimentRecord record(std::uint64_t ecn, std::uint64_t red_max, double share, std::uint64_t drops,
                        std::uint64_t rate = 1'000'000'000)
{
    ExperimentRecord r;
    r.result.config.buffer.ecn_threshold = ecn;
    r.result.config.buffer.red_min = 0;
    r.result.config.buffer.red_max = red_max;
    r.result.config.conditions.line_rate_bps = rate;
    r.result.summary.cubic_share = share;
    r.result.summary.total_drops = drops;
    return r;
}

} // namespace

TEST(Grid, PresetAxisSizes)
{
    const auto g = preset_grid("paper");
    EXPECT_EQ(g.ecn_threshold.size(), 21u);
    EXPECT_EQ(g.ecn_threshold.front(), 0u);
    EXPECT_EQ(g.ecn_threshold.back(), 400'000u);
    EXPECT_EQ(g.red_min.size(), 19u);
    EXPECT_EQ(g.red_max.back(), 1'800'000u);

    // RED pairs with min <= max: 19 * 20 / 2
    auto red_only = g;
    red_only.line_rate_bps = {g.line_rate_bps.front()};
    red_only.cubic_rtt = {g.cubic_rtt.front()};
    red_only.ecn_threshold = {0};
    EXPECT_EQ(generate_grid(red_only).size(), 190u);
    red_only.drop_tail_only = true;
    EXPECT_EQ(generate_grid(red_only).size(), 19u);

    EXPECT_EQ(generate_grid(g).size(), 3u * 3u * 21u * 190u);
    EXPECT_THROW(preset_grid("laptop"), std::invalid_argument);
}

TEST(Grid, DeterministicWithIndexSeeds)
{
    auto g = tiny_grid();
    g.master_seed = 99;
    const auto a = generate_grid(g);
    const auto b = generate_grid(g);
    ASSERT_EQ(a, b);
    ASSERT_EQ(a.size(), 4u);
    std::set<std::uint64_t> seeds;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].seed, mix_seed(99, i));
        seeds.insert(a[i].seed);
        EXPECT_EQ(archive_name(i, a[i]), archive_name(i, b[i]));
        EXPECT_EQ(archive_name(i, a[i]).rfind("exp-" + std::string(6 - std::to_string(i).size(), '0'), 0), 0u);
    }
    EXPECT_EQ(seeds.size(), a.size());
    // innermost axes vary fastest
    EXPECT_EQ(a[0].buffer.ecn_threshold, 20'000u);
    EXPECT_EQ(a[0].buffer.red_min, 900'000u);
    EXPECT_EQ(a[1].buffer.red_min, 1'800'000u);
    EXPECT_EQ(a[2].buffer.ecn_threshold, 100'000u);
    EXPECT_EQ(a[0].sim_duration, 200ms);
    EXPECT_EQ(a[0].flows_per_sender, 2u);
}

TEST(Grid, ReplicatesGetDistinctSeeds)
{
    auto g = tiny_grid();
    g.replicates = 3;
    const auto a = generate_grid(g);
    ASSERT_EQ(a.size(), 12u);
    EXPECT_EQ(a[0].buffer, a[1].buffer);
    EXPECT_NE(a[0].seed, a[1].seed);
}

TEST(Grid, JsonParsing)
{
    auto g = grid_from_json(ojson::parse(R"({
        "preset": "desk", "ecn_threshold_kb": {"from": 0, "to": 400, "step": 20},
        "line_rate_mbps": [100, 12500], "cubic_rtt_ms": 50, "dctcp_rtt_us": [50],
        "receiver_link_delay_us": 10, "snapshot_mean_ms": null, "master_seed": 4,
        "host_queue_limit": 0
    })"));
    EXPECT_EQ(g.ecn_threshold.size(), 21u);
    EXPECT_EQ(g.ecn_threshold[1], 20'000u);
    EXPECT_EQ(g.line_rate_bps, (std::vector<std::uint64_t>{100'000'000, 12'500'000'000}));
    EXPECT_EQ(g.cubic_rtt, (std::vector<Duration>{50ms}));
    EXPECT_EQ(g.dctcp_rtt, (std::vector<Duration>{50us}));
    EXPECT_EQ(g.receiver_link_delay, (std::vector<Duration>{10us}));
    EXPECT_FALSE(g.snapshot_mean.has_value());
    EXPECT_EQ(g.master_seed, 4u);
    EXPECT_EQ(g.host_queue_limit, 0u);
    EXPECT_EQ(GridSpec{}.host_queue_limit, ExperimentConfig{}.host_queue_limit);
    g.drop_tail_only = true;
    for (const auto& c : generate_grid(g))
        ASSERT_EQ(c.host_queue_limit, 0u);
    // desk preset supplies the RED axes
    EXPECT_EQ(g.red_min.size(), 19u);
}

TEST(Grid, RejectsBadInput)
{
    EXPECT_THROW(grid_from_json(ojson::parse(R"({"ecn_kb": 1})")), std::invalid_argument);
    EXPECT_THROW(grid_from_json(ojson::parse(R"({"ecn_threshold_kb": {"from": 0, "to": 10}})")),
                 std::invalid_argument);
    EXPECT_THROW(grid_from_json(ojson::parse(R"({"ecn_threshold_kb": {"from": 0, "to": 10, "step": 0}})")),
                 std::invalid_argument);
    EXPECT_THROW(grid_from_json(ojson::parse(R"({"ecn_threshold_kb": "big"})")), std::invalid_argument);
    EXPECT_THROW(grid_from_json(ojson::parse(R"([1, 2])")), std::invalid_argument);

    GridSpec empty;
    empty.red_min = {1'800'000};
    empty.red_max = {900'000};
    EXPECT_THROW(generate_grid(empty), std::invalid_argument);
    GridSpec none;
    none.ecn_threshold.clear();
    EXPECT_THROW(generate_grid(none), std::invalid_argument);
    EXPECT_THROW(load_grid_file("/nonexistent/grid.json"), std::exception);
}

TEST(Sweep, ParallelMatchesSerialByteForByte)
{
    const auto configs = generate_grid(tiny_grid());
    const auto d1 = temp_dir("w1"), d4 = temp_dir("w4");
    const auto r1 = run_sweep(configs, {d1, 1, {}});
    const auto r4 = run_sweep(configs, {d4, 4, {}});
    EXPECT_EQ(r1.failed(), 0u);
    EXPECT_EQ(r4.failed(), 0u);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        ASSERT_EQ(r1.entries[i].archive, r4.entries[i].archive);
        EXPECT_EQ(r1.entries[i].status, "ok");
        const auto a = slurp(d1 / r1.entries[i].archive);
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, slurp(d4 / r4.entries[i].archive));
        EXPECT_EQ(read_archive(d1 / r1.entries[i].archive).config, configs[i]);
    }
    EXPECT_EQ(slurp(d1 / "experiments.csv"), slurp(d4 / "experiments.csv"));
    EXPECT_EQ(csv_lines(slurp(d1 / "manifest.csv")).size(), configs.size() + 1);
    fs::remove_all(d1);
    fs::remove_all(d4);
}

TEST(Sweep, ResumeSkipsExistingArchives)
{
    const auto configs = generate_grid(tiny_grid());
    const auto d = temp_dir("resume");
    run_sweep({configs[0], configs[1]}, {d, 2, {}});
    const auto before = fs::last_write_time(d / archive_name(0, configs[0]));
    std::size_t progress_calls = 0;
    const auto rep = run_sweep(configs, {d, 2, [&](const SweepEntry&, std::size_t, std::size_t total) {
                                             ++progress_calls;
                                             EXPECT_EQ(total, configs.size());
                                         }});
    EXPECT_EQ(progress_calls, configs.size());
    EXPECT_EQ(rep.entries[0].status, "skipped");
    EXPECT_EQ(rep.entries[1].status, "skipped");
    EXPECT_EQ(rep.entries[2].status, "ok");
    EXPECT_EQ(rep.entries[3].status, "ok");
    EXPECT_EQ(fs::last_write_time(d / archive_name(0, configs[0])), before);
    // the dataset covers skipped and fresh archives alike
    EXPECT_EQ(csv_lines(slurp(d / "experiments.csv")).size(), configs.size() + 1);
    fs::remove_all(d);
}

TEST(Sweep, FailedExperimentIsRecordedAndOthersFinish)
{
    auto configs = generate_grid(tiny_grid());
    configs[1].sim_duration = Duration{0};
    const auto d = temp_dir("fail");
    const auto rep = run_sweep(configs, {d, 3, {}});
    EXPECT_EQ(rep.failed(), 1u);
    EXPECT_EQ(rep.entries[1].status, "failed");
    EXPECT_NE(rep.entries[1].error.find("sim_duration"), std::string::npos);
    EXPECT_FALSE(fs::exists(d / rep.entries[1].archive));
    for (std::size_t i : {0u, 2u, 3u})
        EXPECT_EQ(rep.entries[i].status, "ok");
    const auto manifest = slurp(d / "manifest.csv");
    EXPECT_NE(manifest.find(",failed,"), std::string::npos);
    EXPECT_EQ(load_records(d).size(), 3u);
    fs::remove_all(d);
}

TEST(Dataset, HeaderAndRows)
{
    const auto configs = generate_grid(tiny_grid());
    const auto d = temp_dir("dataset");
    run_sweep(configs, {d, 2, {}});
    const auto records = load_records(d);
    ASSERT_EQ(records.size(), configs.size());
    const auto lines = csv_lines(dataset_csv(records));
    ASSERT_EQ(lines.size(), configs.size() + 1);
    EXPECT_EQ(lines[0].rfind("schema_version,index,archive,", 0), 0u);
    for (const auto& m : metric_names())
        EXPECT_NE(lines[0].find(m), std::string::npos) << m;
    const auto columns = std::count(lines[0].begin(), lines[0].end(), ',');
    for (std::size_t i = 1; i < lines.size(); ++i)
        EXPECT_EQ(std::count(lines[i].begin(), lines[i].end(), ','), columns);
    EXPECT_EQ(lines[1].rfind("1,0,exp-000000-", 0), 0u);
    fs::remove_all(d);
}

TEST(Heatmap, AveragesPerCellAndSorts)
{
    const std::vector<ExperimentRecord> recs{
        record(200'000, 1'800'000, 0.5, 10), record(100'000, 1'800'000, 0.25, 4),
        record(100'000, 1'800'000, 0.5, 6), record(100'000, 900'000, 0.9, 1),
    };
    const auto cells = heatmap_table(recs, "ecn_threshold", "drop_threshold", "cubic_share", {});
    ASSERT_EQ(cells.size(), 3u);
    EXPECT_EQ(cells[0].x, 100'000);
    EXPECT_EQ(cells[0].y, 900'000);
    EXPECT_EQ(cells[0].n, 1u);
    EXPECT_EQ(cells[1].y, 1'800'000);
    EXPECT_EQ(cells[1].z, 0.375);
    EXPECT_EQ(cells[1].n, 2u);
    EXPECT_EQ(cells[2].x, 200'000);

    const auto csv = heatmap_csv(cells, "ecn_threshold", "drop_threshold", "cubic_share");
    const auto lines = csv_lines(csv);
    EXPECT_EQ(lines[0], "ecn_threshold,drop_threshold,cubic_share,n");
    EXPECT_EQ(lines[1], "100000,900000,0.9,1");
    EXPECT_EQ(lines[2], "100000,1800000,0.375,2");
}

TEST(Heatmap, SingleArchiveGivesOneCell)
{
    const auto cells = heatmap_table({record(1, 2, 0.25, 3)}, "ecn_threshold", "red_max", "total_drops", {});
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].z, 3.0);
    EXPECT_EQ(cells[0].n, 1u);
}

TEST(Heatmap, FiltersAndNames)
{
    const std::vector<ExperimentRecord> recs{record(100'000, 1'800'000, 0.2, 4, 1'000'000'000),
                                             record(100'000, 1'800'000, 0.8, 4, 100'000'000)};
    const auto cells =
        heatmap_table(recs, "ecn_threshold", "red_max", "cubic_share", {parse_filter("line_rate_bps=1e8")});
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].z, 0.8);
    EXPECT_TRUE(heatmap_table(recs, "ecn_threshold", "red_max", "cubic_share", {parse_filter("line_rate_bps=5")})
                    .empty());

    EXPECT_THROW(parse_filter("line_rate_bps"), std::invalid_argument);
    EXPECT_THROW(parse_filter("colour=3"), std::invalid_argument);
    EXPECT_THROW(parse_filter("line_rate_bps=fast"), std::invalid_argument);
    EXPECT_THROW(heatmap_table(recs, "nope", "red_max", "cubic_share", {}), std::invalid_argument);
    EXPECT_THROW(heatmap_table(recs, "ecn_threshold", "red_max", "nope", {}), std::invalid_argument);
    for (const auto& n : dimension_names())
        EXPECT_NO_THROW(dimension_value(recs[0], n)) << n;
    for (const auto& n : metric_names())
        EXPECT_NO_THROW(metric_value(recs[0], n)) << n;
}

TEST(FormatNumber, ShortestRoundTrip)
{
    EXPECT_EQ(format_number(1e9), "1000000000");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-3), "-3");
    EXPECT_EQ(format_number(2.0 / 3), "0.6666666666666666");
    EXPECT_EQ(std::stod(format_number(1.0 / 7)), 1.0 / 7);
}
