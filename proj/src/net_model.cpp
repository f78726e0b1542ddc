#include "dcsim/net_model.hpp"

#include <limits>
#include <stdexcept>

namespace dcsim {

Duration Link::serialization(std::uint32_t wire_len) const noexcept
{
    // exact for the usual rates: 1500 B at 1 Gbps is 12000 ns
    const auto bits = static_cast<unsigned __int128>(wire_len) * 8u * 1'000'000'000u;
    return Duration{static_cast<std::int64_t>((bits + rate_bps / 2) / rate_bps)};
}

SimTime Link::transmit(const Packet& pkt, SimTime at) noexcept
{
    const SimTime start = at > busy_until ? at : busy_until;
    busy_until = start + serialization(pkt.wire_len);
    return busy_until + prop_delay;
}

std::string NetworkConditions::validate() const
{
    if (cubic_rtt <= Duration::zero() || dctcp_rtt <= Duration::zero())
        return "RTTs must be positive";
    if (line_rate_bps == 0)
        return "line rate must be positive";
    return {};
}

std::string DumbbellSpec::validate() const
{
    if (n_dctcp_senders + n_cubic_senders == 0)
        return "dumbbell needs at least one sender";
    if (flows_per_sender == 0)
        return "flows_per_sender must be positive";
    if (receiver_link_delay < Duration::zero() || host_jitter < Duration::zero())
        return "delays must be nonnegative";
    if (auto e = conditions.validate(); !e.empty())
        return e;
    return buffer.validate();
}

Dumbbell::Dumbbell(Simulator& sim, const DumbbellSpec& spec, const TransportParams& transport, RandomSource red_rng,
                   RandomSource jitter_rng)
    : sim_(sim), red_rng_(red_rng), jitter_rng_(jitter_rng), host_jitter_(spec.host_jitter),
      host_queue_limit_(spec.host_queue_limit), queue_(spec.buffer)
{
    bottleneck_.rate_bps = spec.conditions.line_rate_bps;
    bottleneck_.prop_delay = spec.receiver_link_delay;

    auto add_nodes = [&](CcKind group, std::uint32_t count, Duration rtt) {
        for (std::uint32_t i = 0; i < count; ++i) {
            Node n{group, Link{spec.conditions.line_rate_bps, rtt / 2, SimTime{0}}, {}};
            nodes_.push_back(std::move(n));
            const auto node = static_cast<std::uint32_t>(nodes_.size() - 1);
            for (std::uint32_t f = 0; f < spec.flows_per_sender; ++f) {
                const auto id = static_cast<FlowId>(flows_.size());
                flows_.push_back(Flow{TcpSender(id, group, transport), TcpReceiver(id), node,
                                      rtt / 2 + spec.receiver_link_delay, {}, {}, std::nullopt, false});
            }
        }
    };
    add_nodes(CcKind::Dctcp, spec.n_dctcp_senders, spec.conditions.dctcp_rtt);
    add_nodes(CcKind::Cubic, spec.n_cubic_senders, spec.conditions.cubic_rtt);
}

void Dumbbell::start_flow(FlowId id)
{
    Flow& f = flows_.at(id);
    if (f.sender.started())
        return;
    prepare(f);
    f.sender.start(sim_.now(), scratch_);
    flush(f);
    after_send(id);
}

std::uint32_t Dumbbell::nic_room(Node& n)
{
    if (host_queue_limit_ == 0)
        return std::numeric_limits<std::uint32_t>::max();
    while (!n.nic_done.empty() && n.nic_done.front() <= sim_.now())
        n.nic_done.pop_front();
    const auto backlog = static_cast<std::uint32_t>(n.nic_done.size());
    return backlog < host_queue_limit_ ? host_queue_limit_ - backlog : 0;
}

void Dumbbell::prepare(Flow& f)
{
    scratch_.clear();
    f.sender.set_tx_allowance(nic_room(nodes_[f.node]));
}

void Dumbbell::after_send(FlowId id)
{
    sync_timer(id);
    Flow& f = flows_[id];
    Node& n = nodes_[f.node];
    if (f.sender.tx_blocked() && !f.waiting_for_nic) {
        f.waiting_for_nic = true;
        n.blocked.push_back(id);
    }
    if (!n.blocked.empty() && !n.wake_pending) {
        // the NIC is full, so a completion is pending
        n.wake_pending = true;
        const std::uint32_t node = f.node;
        sim_.schedule_at(n.nic_done.empty() ? sim_.now() : n.nic_done.front(), [this, node] { nic_wake(node); });
    }
}

void Dumbbell::nic_wake(std::uint32_t node)
{
    Node& n = nodes_[node];
    n.wake_pending = false;
    // round robin over waiting flows while the NIC has room
    std::size_t rounds = n.blocked.size();
    while (rounds-- > 0 && !n.blocked.empty() && nic_room(n) > 0) {
        const FlowId id = n.blocked.front();
        n.blocked.pop_front();
        Flow& f = flows_[id];
        f.waiting_for_nic = false;
        prepare(f);
        f.sender.pump(sim_.now(), scratch_);
        flush(f);
        sync_timer(id);
        if (f.sender.tx_blocked()) {
            f.waiting_for_nic = true;
            n.blocked.push_back(id);
        }
    }
    if (!n.blocked.empty()) {
        n.wake_pending = true;
        nic_room(n);
        sim_.schedule_at(n.nic_done.empty() ? sim_.now() : n.nic_done.front(), [this, node] { nic_wake(node); });
    }
}

void Dumbbell::flush(Flow& f)
{
    for (const Packet& p : scratch_)
        send_from_node(f.node, p);
    scratch_.clear();
}

void Dumbbell::send_from_node(std::uint32_t node, const Packet& pkt)
{
    Node& n = nodes_[node];
    SimTime ready = sim_.now();
    if (host_jitter_ > Duration::zero())
        ready += Duration{static_cast<std::int64_t>(jitter_rng_.uniform(0.0, static_cast<double>(host_jitter_.count())))};
    const SimTime arrival = n.access.transmit(pkt, ready);
    if (host_queue_limit_ > 0)
        n.nic_done.push_back(n.access.busy_until);
    n.in_transit.push_back(pkt);
    sim_.schedule_at(arrival, [this, node] { arrive_at_switch(node); });
}

void Dumbbell::arrive_at_switch(std::uint32_t node)
{
    Node& n = nodes_[node];
    Packet pkt = n.in_transit.front();
    n.in_transit.pop_front();
    const Verdict v = queue_.enqueue(pkt, red_rng_);
    if ((v == Verdict::Enqueued || v == Verdict::EnqueuedMarked) && !bottleneck_busy_)
        start_transmission();
}

void Dumbbell::start_transmission()
{
    if (!queue_.dequeue(in_transmission_)) {
        bottleneck_busy_ = false;
        return;
    }
    bottleneck_busy_ = true;
    bottleneck_.transmit(in_transmission_, sim_.now());
    sim_.schedule_at(bottleneck_.busy_until, [this] { transmission_done(); });
}

void Dumbbell::transmission_done()
{
    if (bottleneck_.prop_delay == Duration::zero()) {
        deliver_to_receiver(in_transmission_);
    } else {
        bottleneck_transit_.push_back(in_transmission_);
        sim_.schedule(bottleneck_.prop_delay, [this] {
            Packet p = bottleneck_transit_.front();
            bottleneck_transit_.pop_front();
            deliver_to_receiver(p);
        });
    }
    start_transmission();
}

void Dumbbell::deliver_to_receiver(const Packet& pkt)
{
    Flow& f = flows_[pkt.flow_id];
    f.acks_in_transit.push_back(f.receiver.on_data(pkt, sim_.now()));
    const FlowId id = pkt.flow_id;
    sim_.schedule(f.reverse_delay, [this, id] { ack_arrives(id); });
}

void Dumbbell::ack_arrives(FlowId id)
{
    Flow& f = flows_[id];
    Packet ack = f.acks_in_transit.front();
    f.acks_in_transit.pop_front();
    prepare(f);
    f.sender.on_ack(ack, sim_.now(), scratch_);
    flush(f);
    after_send(id);
}

void Dumbbell::sync_timer(FlowId id)
{
    Flow& f = flows_[id];
    const auto deadline = f.sender.rto_deadline();
    if (!deadline) {
        if (f.timer_at) {
            sim_.cancel(f.timer);
            f.timer_at.reset();
        }
        return;
    }
    // a pending timer that fires early re-checks the deadline, so only an
    // earlier deadline needs a reschedule
    if (f.timer_at && *f.timer_at <= *deadline)
        return;
    if (f.timer_at)
        sim_.cancel(f.timer);
    f.timer_at = *deadline;
    f.timer = sim_.schedule_at(*deadline, [this, id] { timer_fires(id); });
}

void Dumbbell::timer_fires(FlowId id)
{
    Flow& f = flows_[id];
    f.timer_at.reset();
    const auto deadline = f.sender.rto_deadline();
    if (!deadline)
        return;
    if (sim_.now() < *deadline) {
        sync_timer(id);
        return;
    }
    prepare(f);
    f.sender.on_rto(sim_.now(), scratch_);
    flush(f);
    after_send(id);
}

PerGroup<std::uint64_t> Dumbbell::group_goodput() const
{
    PerGroup<std::uint64_t> g;
    for (const Flow& f : flows_)
        g[nodes_[f.node].group] += f.receiver.goodput_bytes();
    return g;
}

PerGroup<std::uint64_t> Dumbbell::group_retransmits() const
{
    PerGroup<std::uint64_t> g;
    for (const Flow& f : flows_)
        g[nodes_[f.node].group] += f.sender.stats().retransmits;
    return g;
}

std::unique_ptr<Dumbbell> build_dumbbell(Simulator& sim, const DumbbellSpec& spec,
                                         const TransportParams& transport, RandomSource red_rng,
                                         RandomSource jitter_rng)
{
    if (auto err = spec.validate(); !err.empty())
        throw std::invalid_argument("build_dumbbell: " + err);
    return std::make_unique<Dumbbell>(sim, spec, transport, red_rng, jitter_rng);
}

} // namespace dcsim
