// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dcsim/sweep.hpp"

using namespace dcsim;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t KB = 1000;
constexpr std::uint64_t kCapacity = 1800 * KB;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

int failures = 0;

void report(int id, bool ok, const std::string& detail)
{
    std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ExperimentConfig desk(std::uint64_t ecn, std::uint64_t red_min, std::uint64_t red_max, std::uint64_t seed)
{
    ExperimentConfig c;
    c.conditions = NetworkConditions{25ms, 200us, 1'000'000'000};
    c.buffer.capacity = kCapacity;
    c.buffer.ecn_threshold = ecn;
    c.buffer.red_min = red_min;
    c.buffer.red_max = red_max;
    c.buffer.max_drop_prob = 0.05;
    c.n_dctcp_senders = 5;
    c.n_cubic_senders = 5;
    c.flows_per_sender = 4;
    c.sim_duration = 10s;
    c.seed = seed;
    return c;
}

// Runs every config through the sweep harness and returns results in order.
std::vector<ExperimentResult> run_all(const std::vector<ExperimentConfig>& configs, const fs::path& dir,
                                      unsigned workers)
{
    SweepOptions opts{dir, workers, {}};
    const auto rep = run_sweep(configs, opts);
    std::vector<ExperimentResult> out;
    for (const auto& e : rep.entries) {
        if (e.status == "failed")
            throw std::runtime_error("experiment " + std::to_string(e.index) + " failed: " + e.error);
        out.push_back(read_archive(dir / e.archive));
    }
    return out;
}

template <typename F>
double mean_of(const std::vector<const ExperimentResult*>& rs, F f)
{
    double s = 0;
    for (const auto* r : rs)
        s += f(*r);
    return s / static_cast<double>(rs.size());
}

std::vector<double> ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0; // average rank for ties
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

void trends_and_red(const fs::path& work, unsigned workers)
{
    const std::vector<std::uint64_t> ecns{20 * KB, 100 * KB, 200 * KB, 400 * KB};
    const std::vector<std::uint64_t> tails{200 * KB, 800 * KB, 1600 * KB, 1800 * KB};

    // 4x4 grid x 3 seeds, then RED at ECN 100 KB x 3 seeds
    std::vector<ExperimentConfig> configs;
    for (auto e : ecns)
        for (auto t : tails)
            for (auto s : kSeeds)
                configs.push_back(desk(e, t, t, s));
    const std::size_t red_at = configs.size();
    for (auto s : kSeeds)
        configs.push_back(desk(100 * KB, 900 * KB, 1800 * KB, s));
    const auto results = run_all(configs, work / "grid", workers);

    auto cell = [&](std::size_t ei, std::size_t ti) {
        std::vector<const ExperimentResult*> rs;
        for (std::size_t k = 0; k < kSeeds.size(); ++k)
            rs.push_back(&results[(ei * tails.size() + ti) * kSeeds.size() + k]);
        return rs;
    };
    auto share = [](const ExperimentResult& r) { return r.summary.cubic_share; };
    auto drops = [](const ExperimentResult& r) { return static_cast<double>(r.summary.total_drops); };

    // 1: drop-tail at 1.8 MB, shares over ECN
    {
        std::vector<double> s;
        for (std::size_t ei = 0; ei < ecns.size(); ++ei)
            s.push_back(mean_of(cell(ei, 3), share));
        int inversions = 0;
        bool small = true;
        for (std::size_t i = 1; i < s.size(); ++i) {
            if (s[i] < s[i - 1]) {
                ++inversions;
                small = small && s[i - 1] - s[i] <= 0.02;
            }
        }
        const bool gap = s[3] - s[0] >= 0.05;
        const bool ok = gap && inversions <= 1 && small;
        report(1, ok,
               fmt("cubic share at ECN 20/100/200/400 KB = %.3f/%.3f/%.3f/%.3f (need 400-20 >= 0.05, "
                   "nondecreasing up to one inversion <= 0.02)",
                   s[0], s[1], s[2], s[3]));
    }
    // 2: ECN 100 KB, drop-tail 200 KB vs 1.6 MB
    {
        const double lo = mean_of(cell(1, 0), share), hi = mean_of(cell(1, 2), share);
        report(2, hi - lo >= 0.05,
               fmt("cubic share at drop-tail 200 KB = %.3f, 1.6 MB = %.3f (need gain >= 0.05)", lo, hi));
    }
    // 3: Spearman over the 16 cells
    {
        std::vector<double> sh, dr;
        for (std::size_t ei = 0; ei < ecns.size(); ++ei)
            for (std::size_t ti = 0; ti < tails.size(); ++ti) {
                sh.push_back(mean_of(cell(ei, ti), share));
                dr.push_back(mean_of(cell(ei, ti), drops));
            }
        const double rho = spearman(sh, dr);
        report(3, rho > 0, fmt("Spearman(cubic share, total drops) over 16 cells = %.3f (need > 0)", rho));
    }
    // 4: RED vs drop-tail 1.8 MB, both at ECN 100 KB
    {
        std::vector<const ExperimentResult*> red, tail = cell(1, 3);
        for (std::size_t k = 0; k < kSeeds.size(); ++k)
            red.push_back(&results[red_at + k]);
        auto avg = [](const ExperimentResult& r) { return r.summary.avg_buffer; };
        auto mx = [](const ExperimentResult& r) { return static_cast<double>(r.summary.max_buffer); };
        const double dr_red = mean_of(red, drops), dr_tail = mean_of(tail, drops);
        const double av_red = mean_of(red, avg), av_tail = mean_of(tail, avg);
        const double mx_red = mean_of(red, mx), mx_tail = mean_of(tail, mx);
        const double mx_gap = std::abs(mx_red - mx_tail) / std::max(mx_red, mx_tail);
        report(4, dr_red < dr_tail && av_red < av_tail && mx_gap <= 0.15,
               fmt("drops RED %.0f vs tail %.0f; avg buffer %.0f vs %.0f B; max %.0f vs %.0f B (gap %.1f%%)",
                   dr_red, dr_tail, av_red, av_tail, mx_red, mx_tail, 100 * mx_gap));
    }
}

void solo(const fs::path& work, unsigned workers)
{
    std::vector<ExperimentConfig> configs;
    for (auto s : kSeeds) {
        auto c = desk(100 * KB, kCapacity, kCapacity, s);
        c.n_dctcp_senders = 0;
        configs.push_back(c);
    }
    for (auto s : kSeeds) {
        auto c = desk(100 * KB, kCapacity, kCapacity, s);
        c.n_cubic_senders = 0;
        configs.push_back(c);
    }
    const auto r = run_all(configs, work / "solo", workers);
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k < kSeeds.size(); ++k) {
        const double u = bottleneck_utilization(r[k]);
        ok = ok && u >= 0.85;
        detail += fmt("cubic-only util %.3f; ", u);
    }
    const double k_bytes = 100.0 * KB;
    for (std::size_t k = 0; k < kSeeds.size(); ++k) {
        const auto& s = r[kSeeds.size() + k].summary;
        ok = ok && s.avg_buffer >= 0.3 * k_bytes && s.avg_buffer <= 3 * k_bytes && s.dropped_overflow == 0;
        detail += fmt("dctcp-only avg queue %.0f B, overflow %llu; ", s.avg_buffer,
                      static_cast<unsigned long long>(s.dropped_overflow));
    }
    report(5, ok, detail + "(need util >= 0.85, queue in [30000, 300000], 0 overflow)");
}

void qdisc_oracle()
{
    bool ok = true;
    int buckets = 0;
    double worst = 0;
    // held queue levels across the ramp, two max probabilities
    for (double max_p : {0.05, 0.3}) {
        for (std::uint64_t level : {300'000u, 450'000u, 750'000u, 900'000u, 1'200'000u, 1'497'000u}) {
            SharedBufferConfig cfg;
            cfg.ecn_threshold = kCapacity;
            cfg.red_min = 300'000;
            cfg.red_max = 1'500'000;
            cfg.max_drop_prob = max_p;
            SharedBufferQueue q(cfg);
            RandomSource rng(mix_seed(11, level));
            while (q.bytes_queued() + kDataWireBytes <= level) {
                Packet p = Packet::data(0, 0, true, SimTime{0});
                q.enqueue(p, rng);
            }
            const double p = red_drop_probability(static_cast<double>(q.bytes_queued()), cfg);
            const int n = 100'000;
            int drops = 0;
            Packet out;
            for (int i = 0; i < n; ++i) {
                Packet pkt = Packet::data(1, 0, false, SimTime{0});
                if (q.enqueue(pkt, rng) == Verdict::DroppedRed)
                    ++drops;
                else
                    q.dequeue(out);
                ok = ok && q.bytes_queued() == level;
            }
            const double sigma = std::sqrt(p * (1 - p) / n);
            const double dev = std::abs(static_cast<double>(drops) / n - p);
            if (sigma > 0)
                worst = std::max(worst, dev / sigma);
            ok = ok && dev <= 3 * sigma + 1e-12;
            ++buckets;
        }
    }

    // invariants under random mixed traffic
    RandomSource gen(77);
    bool inv = true;
    for (int trial = 0; trial < 20; ++trial) {
        SharedBufferConfig cfg;
        const auto a = static_cast<std::uint64_t>(gen.uniform(0, 19)) * 100'000;
        const auto b = static_cast<std::uint64_t>(gen.uniform(0, 19)) * 100'000;
        cfg.red_min = std::min(a, b);
        cfg.red_max = std::max(a, b);
        cfg.ecn_threshold = static_cast<std::uint64_t>(gen.uniform(0, 21)) * 20'000;
        cfg.max_drop_prob = gen.uniform(0, 1);
        SharedBufferQueue q(cfg);
        RandomSource rng(trial);
        std::uint64_t arrivals = 0;
        Packet out;
        for (int step = 0; step < 5000; ++step) {
            if (gen.bernoulli(0.55)) {
                const bool ect = gen.bernoulli(0.5);
                Packet p = Packet::data(ect ? 1 : 2, 0, ect, SimTime{0});
                ++arrivals;
                const Verdict v = q.enqueue(p, rng);
                inv = inv && !(ect && v == Verdict::DroppedRed) && !(!ect && p.ce);
            } else {
                q.dequeue(out);
            }
            const auto& c = q.counters();
            inv = inv && q.bytes_queued() <= cfg.capacity && c.enqueued == c.dequeued + q.packets_queued() &&
                  arrivals == c.enqueued + c.total_drops();
        }
    }
    report(6, ok && inv,
           fmt("%d buckets x 1e5 arrivals, worst deviation %.2f sigma; invariants %s", buckets, worst,
               inv ? "hold" : "violated"));
}

void determinism(const fs::path& work, unsigned workers)
{
    GridSpec g;
    g.ecn_threshold = {20 * KB, 400 * KB};
    g.red_min = {900 * KB, 1800 * KB};
    g.red_max = {1800 * KB};
    g.master_seed = 2024;
    const auto configs = generate_grid(g);
    const unsigned many = std::max(2u, workers);
    const auto a = run_sweep(configs, {work / "det1", 1, {}});
    const auto b = run_sweep(configs, {work / "det2", many, {}});
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    bool ok = a.failed() == 0 && b.failed() == 0;
    for (std::size_t i = 0; ok && i < configs.size(); ++i) {
        const auto x = slurp(work / "det1" / a.entries[i].archive);
        ok = !x.empty() && x == slurp(work / "det2" / b.entries[i].archive);
    }
    ok = ok && slurp(work / "det1" / "experiments.csv") == slurp(work / "det2" / "experiments.csv");
    report(7, ok, fmt("%zu archives, 1 worker vs %u workers: %s", configs.size(), many,
                      ok ? "byte-identical" : "differ"));
}

void transport_exact()
{
    bool ok = true;
    std::string detail;
    // alpha: fixed points and decay
    for (double g : {1.0 / 16, 1.0 / 256}) {
        ok = ok && dctcp_update_alpha(1.0, 1.0, g) == 1.0 && dctcp_update_alpha(0.0, 0.0, g) == 0.0;
        double a = 1.0, expect = 1.0;
        for (int i = 0; i < 10; ++i) {
            a = dctcp_update_alpha(a, 0.0, g);
            expect *= 1.0 - g;
        }
        ok = ok && std::abs(a - expect) <= 1e-15;
    }
    ok = ok && dctcp_update_alpha(0.0, 1.0, 1.0 / 16) == 1.0 / 16;
    detail += ok ? "alpha ok; " : "alpha wrong; ";

    // cubic curve anchors
    CubicState cs;
    cs.w_max = 100;
    cs.k = cubic_k(cs.w_max, cs.beta, cs.c_scale);
    const double w0 = cubic_target_window(Duration{0}, cs);
    const double wk = cubic_target_window(cs.k, cs);
    const double e0 = std::abs(w0 - cs.beta * cs.w_max) / cs.w_max;
    const double ek = std::abs(wk - cs.w_max) / cs.w_max;
    ok = ok && e0 <= 1e-6 && ek <= 1e-6;
    detail += fmt("W(0) rel err %.1e, W(K) rel err %.1e; ", e0, ek);

    // fast retransmit exactly on the third duplicate ACK
    TcpSender s(0, CcKind::Cubic, TransportParams{});
    std::vector<Packet> out;
    s.start(SimTime{0}, out);
    s.on_ack(Packet::ack(0, kDataPayloadBytes, false, SimTime{0}, SimTime{1ms}), SimTime{1ms}, out);
    std::vector<std::uint64_t> fr_after;
    for (int dup = 1; dup <= 5; ++dup) {
        out.clear();
        s.on_ack(Packet::ack(0, kDataPayloadBytes, false, SimTime{0}, SimTime{1ms}), SimTime{1ms}, out);
        const auto resent = std::count_if(out.begin(), out.end(),
                                          [](const Packet& p) { return p.seq == kDataPayloadBytes; });
        fr_after.push_back(static_cast<std::uint64_t>(resent));
    }
    const bool fr = fr_after == std::vector<std::uint64_t>{0, 0, 1, 0, 0} && s.stats().fast_retransmits == 1;
    ok = ok && fr;
    detail += fr ? "fast retransmit on dup 3 only" : "fast retransmit timing wrong";
    report(8, ok, detail);
}

} // namespace

int main()
{
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    const fs::path work = fs::temp_directory_path() / ("dcsim-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(work);
    try {
        trends_and_red(work, workers);
        solo(work, workers);
        qdisc_oracle();
        determinism(work, workers);
        transport_exact();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        fs::remove_all(work);
        return 2;
    }
    fs::remove_all(work);
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
