#include "dcsim/experiment.hpp"

#include <stdexcept>

namespace dcsim {

std::string ExperimentConfig::validate() const
{
    if (schema_version != kSchemaVersion)
        return "unsupported schema_version " + std::to_string(schema_version);
    if (sim_duration <= Duration::zero())
        return "sim_duration must be positive";
    if (snapshot_mean && *snapshot_mean <= Duration::zero())
        return "snapshot_mean must be positive";
    if (start_window < Duration::zero() || warmup < Duration::zero())
        return "start_window and warmup must be nonnegative";
    return dumbbell().validate();
}

DumbbellSpec ExperimentConfig::dumbbell() const
{
    DumbbellSpec d;
    d.n_dctcp_senders = n_dctcp_senders;
    d.n_cubic_senders = n_cubic_senders;
    d.flows_per_sender = flows_per_sender;
    d.conditions = conditions;
    d.buffer = buffer;
    d.receiver_link_delay = receiver_link_delay;
    d.host_jitter = effective_host_jitter();
    d.host_queue_limit = host_queue_limit;
    return d;
}

Duration ExperimentConfig::effective_host_jitter() const
{
    if (host_jitter)
        return *host_jitter;
    if (conditions.line_rate_bps == 0)
        return Duration{0};
    return Link{conditions.line_rate_bps, Duration{0}, SimTime{0}}.serialization(kDataWireBytes);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    if (auto err = cfg.validate(); !err.empty())
        throw std::invalid_argument("invalid experiment config: " + err);

    const RandomSource root(cfg.seed);
    RandomSource starts = root.fork("flow-starts");

    Simulator sim;
    auto net = build_dumbbell(sim, cfg.dumbbell(), cfg.transport, root.fork("red"), root.fork("host-jitter"));

    for (FlowId id = 0; id < net->flow_count(); ++id) {
        const double at = starts.uniform(0.0, static_cast<double>(cfg.start_window.count()));
        sim.schedule_at(SimTime{static_cast<std::int64_t>(at)}, [&net, id] { net->start_flow(id); });
    }

    PoissonSampler sampler(sim, root.fork("sampling"), cfg.snapshot_mean, [&sim, &net] {
        Snapshot s;
        s.t = sim.now();
        s.queue_bytes = net->queue().bytes_queued();
        s.counters = net->queue().counters();
        s.goodput_bytes = net->group_goodput();
        s.retransmits = net->group_retransmits();
        return s;
    });
    sampler.start();
    sim.run_until(cfg.sim_duration);
    sampler.finish();

    FinalState fs;
    fs.counters = net->queue().counters();
    fs.max_bytes_seen = net->queue().max_bytes_seen();
    fs.duration = cfg.sim_duration;
    for (FlowId id = 0; id < net->flow_count(); ++id) {
        fs.per_flow_goodput.push_back(net->goodput_bytes(id));
        fs.per_flow_group.push_back(net->flow_group(id));
    }

    ExperimentResult r;
    r.config = cfg;
    r.snapshots = sampler.take();
    r.summary = finalize(r.snapshots, fs, cfg.warmup);
    return r;
}

double bottleneck_utilization(const ExperimentResult& r)
{
    const double bits = static_cast<double>(r.summary.bottleneck_packets) * kDataWireBytes * 8.0;
    const double capacity = static_cast<double>(r.config.conditions.line_rate_bps) * to_seconds(r.config.sim_duration);
    return capacity > 0 ? bits / capacity : 0.0;
}

} // namespace dcsim
