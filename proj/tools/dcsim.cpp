// dcsim: grid expansion, parallel sweeps and heatmap tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dcsim/sweep.hpp"

using namespace dcsim;

namespace {

struct GridArgs {
    std::string grid_file;
    std::string preset;
    std::optional<std::uint64_t> master_seed;
    std::optional<double> duration_s;
};

void add_grid_args(CLI::App* cmd, GridArgs& a)
{
    cmd->add_option("--grid-file", a.grid_file, "JSON grid description")->check(CLI::ExistingFile);
    cmd->add_option("--preset", a.preset, "built-in grid: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--master-seed", a.master_seed, "seed from which per-experiment seeds derive");
    cmd->add_option("--duration", a.duration_s, "override simulated seconds for every experiment")
        ->check(CLI::PositiveNumber);
}

std::vector<ExperimentConfig> build_grid(const GridArgs& a)
{
    if (!a.grid_file.empty() && !a.preset.empty())
        throw std::invalid_argument("--grid-file and --preset are mutually exclusive");
    GridSpec g;
    if (!a.grid_file.empty())
        g = load_grid_file(a.grid_file);
    else if (!a.preset.empty())
        g = preset_grid(a.preset);
    else
        throw std::invalid_argument("one of --grid-file or --preset is required");
    if (a.master_seed)
        g.master_seed = *a.master_seed;
    if (a.duration_s)
        g.duration = {from_seconds(*a.duration_s)};
    return generate_grid(g);
}

void write_output(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    write_file_atomic(path, text);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shared-buffer DCTCP/CUBIC simulator and sweep driver"};
    app.require_subcommand(1);

    GridArgs grid_args;
    bool count_only = false;
    auto* grid = app.add_subcommand("grid", "expand a grid and print one JSON line per experiment");
    add_grid_args(grid, grid_args);
    grid->add_flag("--count", count_only, "print only the number of experiments");

    GridArgs run_args;
    std::string out_dir;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    bool quiet = false;
    auto* run = app.add_subcommand("run", "run a sweep, one archive per experiment");
    add_grid_args(run, run_args);
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--workers", workers, "parallel experiments")->check(CLI::PositiveNumber);
    run->add_flag("--quiet", quiet, "no per-experiment progress lines");

    std::string archives;
    std::string x, y, z, report_out;
    std::vector<std::string> filters;
    auto* report = app.add_subcommand("report", "long-format heatmap table from archives");
    report->add_option("--archives", archives, "directory of archives")->required()->check(CLI::ExistingDirectory);
    report->add_option("--x", x, "x dimension")->required();
    report->add_option("--y", y, "y dimension")->required();
    report->add_option("--z", z, "metric averaged per cell")->required();
    report->add_option("--filter", filters, "dim=value, repeatable");
    report->add_option("--out", report_out, "CSV path (default stdout)");

    std::string dataset_dir, dataset_out;
    auto* dataset = app.add_subcommand("dataset", "per-experiment CSV from archives");
    dataset->add_option("--archives", dataset_dir, "directory of archives")->required()->check(CLI::ExistingDirectory);
    dataset->add_option("--out", dataset_out, "CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (grid->parsed()) {
            const auto configs = build_grid(grid_args);
            if (count_only) {
                std::cout << configs.size() << '\n';
                return 0;
            }
            for (std::size_t i = 0; i < configs.size(); ++i) {
                ojson line{{"index", i}, {"archive", archive_name(i, configs[i])}, {"config", to_json(configs[i])}};
                std::cout << line.dump() << '\n';
            }
            return 0;
        }
        if (run->parsed()) {
            const auto configs = build_grid(run_args);
            SweepOptions opts;
            opts.out_dir = out_dir;
            opts.workers = workers;
            if (!quiet) {
                opts.on_progress = [](const SweepEntry& e, std::size_t done, std::size_t total) {
                    std::fprintf(stderr, "[%zu/%zu] %s %s %.0f ms%s%s\n", done, total, e.archive.c_str(),
                                 e.status.c_str(), e.wall_ms, e.error.empty() ? "" : ": ", e.error.c_str());
                };
            }
            const auto rep = run_sweep(configs, opts);
            if (rep.failed() > 0) {
                std::fprintf(stderr, "%zu of %zu experiments failed; see %s/manifest.csv\n", rep.failed(),
                             configs.size(), out_dir.c_str());
                return 1;
            }
            return 0;
        }
        if (report->parsed()) {
            std::vector<Filter> fs;
            for (const auto& f : filters)
                fs.push_back(parse_filter(f));
            const auto cells = heatmap_table(load_records(archives), x, y, z, fs);
            write_output(report_out, heatmap_csv(cells, x, y, z));
            return 0;
        }
        if (dataset->parsed()) {
            write_output(dataset_out, dataset_csv(load_records(dataset_dir)));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dcsim: %s\n", e.what());
        return 2;
    }
    return 0;
}
