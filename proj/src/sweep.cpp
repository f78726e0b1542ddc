#include "dcsim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dcsim {

namespace {

template <typename T>
std::vector<T> linspace(T from, T to, T step)
{
    std::vector<T> v;
    for (T x = from; x <= to; x += step)
        v.push_back(x);
    return v;
}

std::vector<std::uint64_t> kb_range(std::uint64_t from_kb, std::uint64_t to_kb, std::uint64_t step_kb)
{
    std::vector<std::uint64_t> v;
    for (auto kb : linspace(from_kb, to_kb, step_kb))
        v.push_back(kb * 1000);
    return v;
}

// numbers, lists of numbers, or {"from", "to", "step"} ranges
std::vector<double> numbers(const ojson& v, const std::string& key)
{
    if (v.is_number())
        return {v.get<double>()};
    if (v.is_array()) {
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number())
                throw std::invalid_argument("grid: '" + key + "' must hold numbers");
            out.push_back(e.get<double>());
        }
        if (out.empty())
            throw std::invalid_argument("grid: '" + key + "' is an empty list");
        return out;
    }
    if (v.is_object()) {
        const double from = v.at("from").get<double>();
        const double to = v.at("to").get<double>();
        const double step = v.at("step").get<double>();
        if (!(step > 0) || to < from)
            throw std::invalid_argument("grid: '" + key + "' has an empty or unbounded range");
        std::vector<double> out;
        const auto n = static_cast<std::int64_t>(std::floor((to - from) / step + 1e-9));
        for (std::int64_t i = 0; i <= n; ++i)
            out.push_back(from + static_cast<double>(i) * step);
        return out;
    }
    throw std::invalid_argument("grid: '" + key + "' must be a number, list or range");
}

template <typename T>
std::vector<T> scaled(const ojson& v, const std::string& key, double unit)
{
    std::vector<T> out;
    for (double x : numbers(v, key)) {
        if (x < 0)
            throw std::invalid_argument("grid: '" + key + "' must be nonnegative");
        out.push_back(static_cast<T>(std::llround(x * unit)));
    }
    return out;
}

std::vector<Duration> durations(const ojson& v, const std::string& key, double unit_ns)
{
    std::vector<Duration> out;
    for (auto n : scaled<std::int64_t>(v, key, unit_ns))
        out.push_back(Duration{n});
    return out;
}

Duration single_duration(const ojson& v, const std::string& key, double unit_ns)
{
    auto d = durations(v, key, unit_ns);
    if (d.size() != 1)
        throw std::invalid_argument("grid: '" + key + "' takes a single value");
    return d.front();
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::uint64_t file_index(const std::string& name, std::size_t fallback)
{
    // exp-NNNNNN-...
    if (name.rfind("exp-", 0) != 0)
        return fallback;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(name.data() + 4, name.data() + name.size(), v);
    return ec == std::errc{} && p != name.data() + 4 ? v : fallback;
}

} // namespace

std::string GridSpec::validate() const
{
    const bool empty = line_rate_bps.empty() || cubic_rtt.empty() || dctcp_rtt.empty() || duration.empty() ||
                       capacity.empty() || drop_prob.empty() || n_dctcp_senders.empty() ||
                       n_cubic_senders.empty() || flows_per_sender.empty() || receiver_link_delay.empty() ||
                       ecn_threshold.empty() || red_min.empty() || red_max.empty();
    if (empty)
        return "every grid dimension needs at least one value";
    if (replicates == 0)
        return "replicates must be positive";
    return {};
}

GridSpec preset_grid(std::string_view name)
{
    GridSpec g;
    g.ecn_threshold = kb_range(0, 400, 20);
    g.red_min = kb_range(0, 1800, 100);
    g.red_max = g.red_min;
    g.drop_prob = {0.05};
    g.capacity = {1'800'000};
    g.snapshot_mean = 10ms;
    g.cubic_rtt = {25ms, 50ms, 100ms};
    if (name == "paper") {
        g.line_rate_bps = {5'000'000'000, 12'500'000'000, 25'000'000'000};
        g.dctcp_rtt = {50us};
        g.duration = {120s};
        g.n_dctcp_senders = {10};
        g.n_cubic_senders = {10};
        g.flows_per_sender = {10};
    } else if (name == "desk") {
        g.line_rate_bps = {100'000'000, 1'000'000'000};
        g.dctcp_rtt = {200us};
        g.duration = {5s, 10s};
        g.n_dctcp_senders = {5};
        g.n_cubic_senders = {5};
        g.flows_per_sender = {4};
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected desk or paper)");
    }
    return g;
}

namespace {

GridSpec parse_grid(const ojson& j)
{
    if (!j.is_object())
        throw std::invalid_argument("grid: top level must be an object");
    GridSpec g;
    if (j.contains("preset"))
        g = preset_grid(j.at("preset").get<std::string>());

    for (const auto& [key, v] : j.items()) {
        if (key == "preset")
            continue;
        else if (key == "line_rate_mbps")
            g.line_rate_bps = scaled<std::uint64_t>(v, key, 1e6);
        else if (key == "cubic_rtt_ms")
            g.cubic_rtt = durations(v, key, 1e6);
        else if (key == "dctcp_rtt_us")
            g.dctcp_rtt = durations(v, key, 1e3);
        else if (key == "duration_s")
            g.duration = durations(v, key, 1e9);
        else if (key == "buffer_kb")
            g.capacity = scaled<std::uint64_t>(v, key, 1e3);
        else if (key == "drop_prob")
            g.drop_prob = numbers(v, key);
        else if (key == "n_dctcp_senders")
            g.n_dctcp_senders = scaled<std::uint32_t>(v, key, 1);
        else if (key == "n_cubic_senders")
            g.n_cubic_senders = scaled<std::uint32_t>(v, key, 1);
        else if (key == "flows_per_sender")
            g.flows_per_sender = scaled<std::uint32_t>(v, key, 1);
        else if (key == "receiver_link_delay_us")
            g.receiver_link_delay = durations(v, key, 1e3);
        else if (key == "ecn_threshold_kb")
            g.ecn_threshold = scaled<std::uint64_t>(v, key, 1e3);
        else if (key == "red_min_kb")
            g.red_min = scaled<std::uint64_t>(v, key, 1e3);
        else if (key == "red_max_kb")
            g.red_max = scaled<std::uint64_t>(v, key, 1e3);
        else if (key == "snapshot_mean_ms")
            g.snapshot_mean = v.is_null() ? std::nullopt : std::optional(single_duration(v, key, 1e6));
        else if (key == "start_window_s")
            g.start_window = single_duration(v, key, 1e9);
        else if (key == "red_avg_weight")
            g.red_avg_weight = v.get<double>();
        else if (key == "host_queue_limit")
            g.host_queue_limit = v.get<std::uint32_t>();
        else if (key == "drop_tail_only")
            g.drop_tail_only = v.get<bool>();
        else if (key == "replicates")
            g.replicates = v.get<std::uint32_t>();
        else if (key == "master_seed")
            g.master_seed = v.get<std::uint64_t>();
        else
            throw std::invalid_argument("grid: unknown key '" + key + "'");
    }
    if (auto err = g.validate(); !err.empty())
        throw std::invalid_argument("grid: " + err);
    return g;
}

} // namespace

GridSpec grid_from_json(const ojson& j)
{
    try {
        return parse_grid(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("grid: ") + e.what());
    }
}

GridSpec load_grid_file(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::invalid_argument("cannot open grid file " + path.string());
    try {
        return grid_from_json(ojson::parse(f, nullptr, true, true));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::vector<ExperimentConfig> generate_grid(const GridSpec& g)
{
    if (auto err = g.validate(); !err.empty())
        throw std::invalid_argument("grid: " + err);

    std::vector<ExperimentConfig> out;
    ExperimentConfig c;
    c.snapshot_mean = g.snapshot_mean;
    c.start_window = g.start_window;
    c.buffer.avg_weight = g.red_avg_weight;
    c.host_queue_limit = g.host_queue_limit;
    for (auto rate : g.line_rate_bps)
    for (auto crtt : g.cubic_rtt)
    for (auto drtt : g.dctcp_rtt)
    for (auto dur : g.duration)
    for (auto cap : g.capacity)
    for (auto p : g.drop_prob)
    for (auto nd : g.n_dctcp_senders)
    for (auto nc : g.n_cubic_senders)
    for (auto fps : g.flows_per_sender)
    for (auto rld : g.receiver_link_delay)
    for (auto ecn : g.ecn_threshold)
    for (auto rmin : g.red_min)
    for (auto rmax : g.red_max) {
        if (rmin > rmax || (g.drop_tail_only && rmin != rmax))
            continue;
        c.conditions = NetworkConditions{crtt, drtt, rate};
        c.sim_duration = dur;
        c.buffer.capacity = cap;
        c.buffer.max_drop_prob = p;
        c.n_dctcp_senders = nd;
        c.n_cubic_senders = nc;
        c.flows_per_sender = fps;
        c.receiver_link_delay = rld;
        c.buffer.ecn_threshold = ecn;
        c.buffer.red_min = rmin;
        c.buffer.red_max = rmax;
        for (std::uint32_t rep = 0; rep < g.replicates; ++rep) {
            c.seed = mix_seed(g.master_seed, out.size());
            out.push_back(c);
        }
    }
    if (out.empty())
        throw std::invalid_argument("grid: no configuration survives the constraints");
    return out;
}

std::string archive_name(std::size_t index, const ExperimentConfig& cfg)
{
    char buf[64];
    const auto h = fnv1a64(to_json(cfg).dump());
    std::snprintf(buf, sizeof buf, "exp-%06zu-%08llx.jsonl.gz", index,
                  static_cast<unsigned long long>(h & 0xffffffffULL));
    return buf;
}

std::size_t SweepReport::failed() const
{
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const SweepEntry& e) { return e.status == "failed"; }));
}

SweepReport run_sweep(const std::vector<ExperimentConfig>& configs, const SweepOptions& opts)
{
    namespace fs = std::filesystem;
    fs::create_directories(opts.out_dir);

    SweepReport report;
    report.entries.resize(configs.size());
    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::mutex progress_mu;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size())
                return;
            SweepEntry& e = report.entries[i];
            e.index = i;
            e.archive = archive_name(i, configs[i]);
            const fs::path path = opts.out_dir / e.archive;
            const auto t0 = std::chrono::steady_clock::now();
            if (fs::exists(path)) {
                e.status = "skipped";
            } else {
                try {
                    write_archive(path, run_experiment(configs[i]));
                    e.status = "ok";
                } catch (const std::exception& ex) {
                    e.status = "failed";
                    e.error = ex.what();
                }
            }
            e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            if (opts.on_progress) {
                std::lock_guard lock(progress_mu);
                opts.on_progress(e, ++done, configs.size());
            }
        }
    };

    const unsigned n = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(configs.size())));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < n; ++w)
            pool.emplace_back(work);
        work();
    }

    std::ostringstream manifest;
    manifest << "index,archive,status,wall_ms,error\n";
    std::vector<ExperimentRecord> records;
    for (const SweepEntry& e : report.entries) {
        manifest << e.index << ',' << e.archive << ',' << e.status << ',' << format_number(e.wall_ms) << ','
                 << csv_escape(e.error) << '\n';
        if (e.status == "failed")
            continue;
        try {
            records.push_back(ExperimentRecord{e.index, e.archive, read_archive(opts.out_dir / e.archive)});
        } catch (const std::exception&) {
            // an unreadable leftover from an older run; the dataset skips it
        }
    }
    write_file_atomic(opts.out_dir / "manifest.csv", manifest.str());
    write_file_atomic(opts.out_dir / "experiments.csv", dataset_csv(records));
    return report;
}

std::vector<ExperimentRecord> load_records(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw std::invalid_argument("not a directory: " + dir.string());
    std::vector<std::string> names;
    for (const auto& de : fs::directory_iterator(dir)) {
        const auto name = de.path().filename().string();
        if (de.is_regular_file() && name.size() > 9 && name.ends_with(".jsonl.gz"))
            names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    std::vector<ExperimentRecord> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        out.push_back(ExperimentRecord{file_index(names[i], i), names[i], read_archive(dir / names[i])});
    return out;
}

const std::vector<std::string>& dimension_names()
{
    static const std::vector<std::string> names{
        "line_rate_bps", "cubic_rtt_ns", "dctcp_rtt_ns", "capacity", "ecn_threshold",
        "red_min", "red_max", "drop_threshold", "max_drop_prob", "n_dctcp_senders",
        "n_cubic_senders", "flows_per_sender", "sim_duration_ns", "receiver_link_delay_ns", "host_queue_limit",
        "seed",
    };
    return names;
}

const std::vector<std::string>& metric_names()
{
    static const std::vector<std::string> names{
        "cubic_share", "total_drops", "avg_buffer", "max_buffer", "total_goodput", "marked_ecn",
        "dropped_overflow", "dropped_red", "dctcp_goodput", "cubic_goodput", "utilization",
    };
    return names;
}

double dimension_value(const ExperimentRecord& r, std::string_view name)
{
    const ExperimentConfig& c = r.result.config;
    if (name == "line_rate_bps") return static_cast<double>(c.conditions.line_rate_bps);
    if (name == "cubic_rtt_ns") return static_cast<double>(c.conditions.cubic_rtt.count());
    if (name == "dctcp_rtt_ns") return static_cast<double>(c.conditions.dctcp_rtt.count());
    if (name == "capacity") return static_cast<double>(c.buffer.capacity);
    if (name == "ecn_threshold") return static_cast<double>(c.buffer.ecn_threshold);
    if (name == "red_min") return static_cast<double>(c.buffer.red_min);
    // meaningful for drop-tail settings, where min and max coincide
    if (name == "red_max" || name == "drop_threshold") return static_cast<double>(c.buffer.red_max);
    if (name == "max_drop_prob") return c.buffer.max_drop_prob;
    if (name == "n_dctcp_senders") return c.n_dctcp_senders;
    if (name == "n_cubic_senders") return c.n_cubic_senders;
    if (name == "flows_per_sender") return c.flows_per_sender;
    if (name == "sim_duration_ns") return static_cast<double>(c.sim_duration.count());
    if (name == "receiver_link_delay_ns") return static_cast<double>(c.receiver_link_delay.count());
    if (name == "host_queue_limit") return c.host_queue_limit;
    if (name == "seed") return static_cast<double>(c.seed);
    throw std::invalid_argument("unknown dimension '" + std::string(name) + "'");
}

double metric_value(const ExperimentRecord& r, std::string_view name)
{
    const ExperimentSummary& s = r.result.summary;
    if (name == "cubic_share") return s.cubic_share;
    if (name == "total_drops") return static_cast<double>(s.total_drops);
    if (name == "avg_buffer") return s.avg_buffer;
    if (name == "max_buffer") return static_cast<double>(s.max_buffer);
    if (name == "total_goodput") return static_cast<double>(s.total_goodput);
    if (name == "marked_ecn") return static_cast<double>(s.marked_ecn);
    if (name == "dropped_overflow") return static_cast<double>(s.dropped_overflow);
    if (name == "dropped_red") return static_cast<double>(s.dropped_red);
    if (name == "dctcp_goodput") return static_cast<double>(s.dctcp_goodput);
    if (name == "cubic_goodput") return static_cast<double>(s.cubic_goodput);
    if (name == "utilization") return bottleneck_utilization(r.result);
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

std::string format_number(double v)
{
    if (std::isfinite(v) && v == std::trunc(v) && std::fabs(v) < 0x1p53)
        return std::to_string(static_cast<std::int64_t>(v));
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string dataset_csv(const std::vector<ExperimentRecord>& records)
{
    std::ostringstream out;
    out << "schema_version,index,archive";
    for (const auto& d : dimension_names())
        if (d != "drop_threshold" && d != "seed")
            out << ',' << d;
    out << ",seed";
    for (const auto& m : metric_names())
        out << ',' << m;
    out << '\n';
    for (const auto& r : records) {
        out << r.result.config.schema_version << ',' << r.index << ',' << r.archive;
        for (const auto& d : dimension_names())
            if (d != "drop_threshold" && d != "seed")
                out << ',' << format_number(dimension_value(r, d));
        out << ',' << r.result.config.seed;
        for (const auto& m : metric_names())
            out << ',' << format_number(metric_value(r, m));
        out << '\n';
    }
    return out.str();
}

Filter parse_filter(std::string_view text)
{
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw std::invalid_argument("filter must look like dim=value: '" + std::string(text) + "'");
    Filter f;
    f.dim = std::string(text.substr(0, eq));
    const auto& dims = dimension_names();
    if (std::find(dims.begin(), dims.end(), f.dim) == dims.end())
        throw std::invalid_argument("unknown filter dimension '" + f.dim + "'");
    const auto val = text.substr(eq + 1);
    auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), f.value);
    if (ec != std::errc{} || p != val.data() + val.size())
        throw std::invalid_argument("filter value is not a number: '" + std::string(val) + "'");
    return f;
}

std::vector<HeatmapCell> heatmap_table(const std::vector<ExperimentRecord>& records, std::string_view x,
                                       std::string_view y, std::string_view z, const std::vector<Filter>& filters)
{
    const auto& dims = dimension_names();
    const auto& mets = metric_names();
    for (auto d : {x, y})
        if (std::find(dims.begin(), dims.end(), d) == dims.end())
            throw std::invalid_argument("unknown dimension '" + std::string(d) + "'");
    if (std::find(mets.begin(), mets.end(), z) == mets.end())
        throw std::invalid_argument("unknown metric '" + std::string(z) + "'");

    std::map<std::pair<double, double>, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
        bool keep = true;
        for (const auto& f : filters)
            keep = keep && dimension_value(r, f.dim) == f.value;
        if (!keep)
            continue;
        auto& cell = acc[{dimension_value(r, x), dimension_value(r, y)}];
        cell.first += metric_value(r, z);
        ++cell.second;
    }
    std::vector<HeatmapCell> out;
    for (const auto& [k, v] : acc)
        out.push_back(HeatmapCell{k.first, k.second, v.first / static_cast<double>(v.second), v.second});
    return out;
}

std::string heatmap_csv(const std::vector<HeatmapCell>& cells, std::string_view x, std::string_view y,
                        std::string_view z)
{
    std::ostringstream out;
    out << x << ',' << y << ',' << z << ",n\n";
    for (const auto& c : cells)
        out << format_number(c.x) << ',' << format_number(c.y) << ',' << format_number(c.z) << ',' << c.n << '\n';
    return out.str();
}

} // namespace dcsim
