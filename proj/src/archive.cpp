#include "dcsim/archive.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

namespace dcsim {

namespace {

std::int64_t ns(Duration d) { return d.count(); }

Duration get_ns(const ojson& j, const char* key) { return Duration{j.at(key).get<std::int64_t>()}; }

std::optional<Duration> get_opt_ns(const ojson& j, const char* key)
{
    const auto& v = j.at(key);
    if (v.is_null())
        return std::nullopt;
    return Duration{v.get<std::int64_t>()};
}

ojson opt_ns(const std::optional<Duration>& d) { return d ? ojson(d->count()) : ojson(nullptr); }

ojson counters_json(const QueueCounters& c)
{
    return ojson{{"enqueued", c.enqueued},
                 {"dequeued", c.dequeued},
                 {"dropped_overflow", c.dropped_overflow},
                 {"dropped_red", c.dropped_red},
                 {"marked_ecn", c.marked_ecn}};
}

QueueCounters counters_from(const ojson& j)
{
    QueueCounters c;
    c.enqueued = j.at("enqueued").get<std::uint64_t>();
    c.dequeued = j.at("dequeued").get<std::uint64_t>();
    c.dropped_overflow = j.at("dropped_overflow").get<std::uint64_t>();
    c.dropped_red = j.at("dropped_red").get<std::uint64_t>();
    c.marked_ecn = j.at("marked_ecn").get<std::uint64_t>();
    return c;
}

void check_version(const ojson& line, const char* kind)
{
    if (!line.is_object() || line.value("kind", "") != kind)
        throw ArchiveError(std::string("archive: expected a '") + kind + "' document");
    const int v = line.at("schema_version").get<int>();
    if (v != kSchemaVersion)
        throw ArchiveError("archive: schema_version " + std::to_string(v) + " is not supported (expected " +
                           std::to_string(kSchemaVersion) + ")");
}

} // namespace

ojson to_json(const TransportParams& p)
{
    return ojson{{"mss", p.mss},
                 {"initial_cwnd", p.initial_cwnd},
                 {"dctcp_g", p.dctcp_g},
                 {"dctcp_initial_alpha", p.dctcp_initial_alpha},
                 {"cubic_c", p.cubic_c},
                 {"cubic_beta", p.cubic_beta},
                 {"cubic_reno_friendly", p.cubic_reno_friendly},
                 {"cubic_fast_convergence", p.cubic_fast_convergence},
                 {"cubic_hystart", p.cubic_hystart},
                 {"min_rto_ns", ns(p.min_rto)},
                 {"max_rto_ns", ns(p.max_rto)},
                 {"initial_rto_ns", ns(p.initial_rto)}};
}

TransportParams transport_from_json(const ojson& j)
{
    TransportParams p;
    p.mss = j.at("mss").get<std::uint32_t>();
    p.initial_cwnd = j.at("initial_cwnd").get<double>();
    p.dctcp_g = j.at("dctcp_g").get<double>();
    p.dctcp_initial_alpha = j.at("dctcp_initial_alpha").get<double>();
    p.cubic_c = j.at("cubic_c").get<double>();
    p.cubic_beta = j.at("cubic_beta").get<double>();
    p.cubic_reno_friendly = j.at("cubic_reno_friendly").get<bool>();
    p.cubic_fast_convergence = j.at("cubic_fast_convergence").get<bool>();
    p.cubic_hystart = j.at("cubic_hystart").get<bool>();
    p.min_rto = get_ns(j, "min_rto_ns");
    p.max_rto = get_ns(j, "max_rto_ns");
    p.initial_rto = get_ns(j, "initial_rto_ns");
    return p;
}

ojson to_json(const ExperimentConfig& c)
{
    return ojson{
        {"seed", c.seed},
        {"generator", RandomSource::kGenerator},
        {"conditions",
         {{"cubic_rtt_ns", ns(c.conditions.cubic_rtt)},
          {"dctcp_rtt_ns", ns(c.conditions.dctcp_rtt)},
          {"line_rate_bps", c.conditions.line_rate_bps}}},
        {"buffer",
         {{"capacity", c.buffer.capacity},
          {"ecn_threshold", c.buffer.ecn_threshold},
          {"red_min", c.buffer.red_min},
          {"red_max", c.buffer.red_max},
          {"max_drop_prob", c.buffer.max_drop_prob},
          {"avg_weight", c.buffer.avg_weight}}},
        {"n_dctcp_senders", c.n_dctcp_senders},
        {"n_cubic_senders", c.n_cubic_senders},
        {"flows_per_sender", c.flows_per_sender},
        {"sim_duration_ns", ns(c.sim_duration)},
        {"snapshot_mean_ns", opt_ns(c.snapshot_mean)},
        {"start_window_ns", ns(c.start_window)},
        {"receiver_link_delay_ns", ns(c.receiver_link_delay)},
        {"host_jitter_ns", opt_ns(c.host_jitter)},
        {"host_queue_limit", c.host_queue_limit},
        {"warmup_ns", ns(c.warmup)},
        {"transport", to_json(c.transport)},
    };
}

ExperimentConfig config_from_json(const ojson& j)
{
    ExperimentConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("generator").get<std::string>() != RandomSource::kGenerator)
        throw ArchiveError("archive: generated with an unknown random engine");
    const auto& cond = j.at("conditions");
    c.conditions.cubic_rtt = get_ns(cond, "cubic_rtt_ns");
    c.conditions.dctcp_rtt = get_ns(cond, "dctcp_rtt_ns");
    c.conditions.line_rate_bps = cond.at("line_rate_bps").get<std::uint64_t>();
    const auto& b = j.at("buffer");
    c.buffer.capacity = b.at("capacity").get<std::uint64_t>();
    c.buffer.ecn_threshold = b.at("ecn_threshold").get<std::uint64_t>();
    c.buffer.red_min = b.at("red_min").get<std::uint64_t>();
    c.buffer.red_max = b.at("red_max").get<std::uint64_t>();
    c.buffer.max_drop_prob = b.at("max_drop_prob").get<double>();
    c.buffer.avg_weight = b.at("avg_weight").get<double>();
    c.n_dctcp_senders = j.at("n_dctcp_senders").get<std::uint32_t>();
    c.n_cubic_senders = j.at("n_cubic_senders").get<std::uint32_t>();
    c.flows_per_sender = j.at("flows_per_sender").get<std::uint32_t>();
    c.sim_duration = get_ns(j, "sim_duration_ns");
    c.snapshot_mean = get_opt_ns(j, "snapshot_mean_ns");
    c.start_window = get_ns(j, "start_window_ns");
    c.receiver_link_delay = get_ns(j, "receiver_link_delay_ns");
    c.host_jitter = get_opt_ns(j, "host_jitter_ns");
    c.host_queue_limit = j.at("host_queue_limit").get<std::uint32_t>();
    c.warmup = get_ns(j, "warmup_ns");
    c.transport = transport_from_json(j.at("transport"));
    return c;
}

ojson to_json(const ExperimentSummary& s)
{
    return ojson{{"cubic_share", s.cubic_share},
                 {"total_drops", s.total_drops},
                 {"avg_buffer", s.avg_buffer},
                 {"max_buffer", s.max_buffer},
                 {"total_goodput", s.total_goodput},
                 {"per_flow_goodput", s.per_flow_goodput},
                 {"marked_ecn", s.marked_ecn},
                 {"duration_ns", ns(s.duration)},
                 {"dropped_overflow", s.dropped_overflow},
                 {"dropped_red", s.dropped_red},
                 {"dctcp_goodput", s.dctcp_goodput},
                 {"cubic_goodput", s.cubic_goodput},
                 {"bottleneck_packets", s.bottleneck_packets},
                 {"zero_goodput", s.zero_goodput}};
}

ExperimentSummary summary_from_json(const ojson& j)
{
    ExperimentSummary s;
    s.cubic_share = j.at("cubic_share").get<double>();
    s.total_drops = j.at("total_drops").get<std::uint64_t>();
    s.avg_buffer = j.at("avg_buffer").get<double>();
    s.max_buffer = j.at("max_buffer").get<std::uint64_t>();
    s.total_goodput = j.at("total_goodput").get<std::uint64_t>();
    s.per_flow_goodput = j.at("per_flow_goodput").get<std::vector<std::uint64_t>>();
    s.marked_ecn = j.at("marked_ecn").get<std::uint64_t>();
    s.duration = get_ns(j, "duration_ns");
    s.dropped_overflow = j.at("dropped_overflow").get<std::uint64_t>();
    s.dropped_red = j.at("dropped_red").get<std::uint64_t>();
    s.dctcp_goodput = j.at("dctcp_goodput").get<std::uint64_t>();
    s.cubic_goodput = j.at("cubic_goodput").get<std::uint64_t>();
    s.bottleneck_packets = j.at("bottleneck_packets").get<std::uint64_t>();
    s.zero_goodput = j.at("zero_goodput").get<bool>();
    return s;
}

ojson to_json(const Snapshot& s)
{
    ojson j{{"t_ns", ns(s.t)}, {"queue_bytes", s.queue_bytes}};
    const ojson counters = counters_json(s.counters);
    for (const auto& [k, v] : counters.items())
        j[k] = v;
    j["goodput_dctcp"] = s.goodput_bytes.dctcp;
    j["goodput_cubic"] = s.goodput_bytes.cubic;
    j["retransmits_dctcp"] = s.retransmits.dctcp;
    j["retransmits_cubic"] = s.retransmits.cubic;
    return j;
}

Snapshot snapshot_from_json(const ojson& j)
{
    Snapshot s;
    s.t = get_ns(j, "t_ns");
    s.queue_bytes = j.at("queue_bytes").get<std::uint64_t>();
    s.counters = counters_from(j);
    s.goodput_bytes.dctcp = j.at("goodput_dctcp").get<std::uint64_t>();
    s.goodput_bytes.cubic = j.at("goodput_cubic").get<std::uint64_t>();
    s.retransmits.dctcp = j.at("retransmits_dctcp").get<std::uint64_t>();
    s.retransmits.cubic = j.at("retransmits_cubic").get<std::uint64_t>();
    return s;
}

std::string serialize_archive(const ExperimentResult& r)
{
    ojson snaps = ojson::array();
    for (const Snapshot& s : r.snapshots)
        snaps.push_back(to_json(s));

    std::string out;
    out += ojson{{"kind", "config"}, {"schema_version", r.config.schema_version}, {"config", to_json(r.config)}}.dump();
    out += '\n';
    out += ojson{{"kind", "summary"}, {"schema_version", r.config.schema_version}, {"summary", to_json(r.summary)}}
               .dump();
    out += '\n';
    out += ojson{{"kind", "snapshots"}, {"schema_version", r.config.schema_version}, {"snapshots", snaps}}.dump();
    out += '\n';
    return out;
}

ExperimentResult parse_archive(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string lines[3];
    for (auto& l : lines)
        if (!std::getline(in, l))
            throw ArchiveError("archive: expected three JSON lines");

    try {
        ExperimentResult r;
        const ojson cfg = ojson::parse(lines[0]);
        check_version(cfg, "config");
        r.config = config_from_json(cfg.at("config"));
        r.config.schema_version = cfg.at("schema_version").get<int>();

        const ojson sum = ojson::parse(lines[1]);
        check_version(sum, "summary");
        r.summary = summary_from_json(sum.at("summary"));

        const ojson snaps = ojson::parse(lines[2]);
        check_version(snaps, "snapshots");
        for (const auto& s : snaps.at("snapshots"))
            r.snapshots.push_back(snapshot_from_json(s));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ArchiveError(std::string("archive: ") + e.what());
    }
}

std::string gzip_compress(std::string_view data)
{
    z_stream zs{};
    // windowBits 15 + 16 selects a gzip wrapper; its header carries no mtime
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw ArchiveError("gzip: deflateInit2 failed");
    std::string out;
    out.resize(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw ArchiveError("gzip: compression failed");
    out.resize(zs.total_out);
    return out;
}

std::string gzip_decompress(std::string_view data)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw ArchiveError("gzip: inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    std::string out;
    char buf[1 << 16];
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ArchiveError("gzip: corrupt or truncated data");
        }
        out.append(buf, sizeof buf - zs.avail_out);
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw ArchiveError("gzip: truncated data");
        }
    }
    inflateEnd(&zs);
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f)
            throw std::runtime_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw std::runtime_error("rename " + tmp.string() + ": " + ec.message());
}

void write_archive(const std::filesystem::path& path, const ExperimentResult& r)
{
    write_file_atomic(path, gzip_compress(serialize_archive(r)));
}

ExperimentResult read_archive(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ArchiveError("cannot open archive " + path.string());
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_archive(gzip_decompress(raw));
}

} // namespace dcsim
