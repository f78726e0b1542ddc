#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcsim/packet.hpp"
#include "dcsim/shared_buffer.hpp"
#include "dcsim/sim_core.hpp"
#include "dcsim/transport.hpp"

namespace dcsim {

/// Store-and-forward point-to-point link. Transmissions are serialized in
/// call order, so deliveries on one link are FIFO.
struct Link {
    std::uint64_t rate_bps = 1'000'000'000;
    Duration prop_delay{0};
    SimTime busy_until{0};

    Duration serialization(std::uint32_t wire_len) const noexcept;

    /// Starts sending `pkt` no earlier than `at`; returns when its last bit
    /// arrives at the far end.
    SimTime transmit(const Packet& pkt, SimTime at) noexcept;
};

struct NetworkConditions {
    Duration cubic_rtt = 25ms;
    Duration dctcp_rtt = 200us;
    std::uint64_t line_rate_bps = 1'000'000'000;

    std::string validate() const;
    bool operator==(const NetworkConditions&) const = default;
};

struct DumbbellSpec {
    std::uint32_t n_dctcp_senders = 10;
    std::uint32_t n_cubic_senders = 10;
    std::uint32_t flows_per_sender = 10;
    NetworkConditions conditions;
    SharedBufferConfig buffer;
    Duration receiver_link_delay{0}; // propagation on the switch->receiver hop
    // Upper bound of a uniform per-packet send delay at each host; breaks the
    // phase lock of a drop-tail queue fed by perfectly periodic ACK clocks.
    Duration host_jitter{0};
    // Packets a host may have waiting at or on its NIC; further segments stay
    // in the socket and do not count as in flight. 0 means no limit.
    std::uint32_t host_queue_limit = 0;

    std::string validate() const;
};

template <typename T>
struct PerGroup {
    T dctcp{};
    T cubic{};

    T& operator[](CcKind k) noexcept { return k == CcKind::Dctcp ? dctcp : cubic; }
    const T& operator[](CcKind k) const noexcept { return k == CcKind::Dctcp ? dctcp : cubic; }
    bool operator==(const PerGroup&) const = default;
};

/// A wired-up dumbbell: sender hosts with dedicated access links into one
/// switch whose shared-buffer queue feeds the bottleneck to a single
/// receiver. ACKs return over an ideal fixed-delay path.
///
/// Instances are pinned in memory because scheduled events hold `this`.
class Dumbbell {
public:
    Dumbbell(Simulator& sim, const DumbbellSpec& spec, const TransportParams& transport, RandomSource red_rng,
             RandomSource jitter_rng);
    Dumbbell(const Dumbbell&) = delete;
    Dumbbell& operator=(const Dumbbell&) = delete;

    std::size_t flow_count() const noexcept { return flows_.size(); }
    std::size_t sender_count() const noexcept { return nodes_.size(); }
    CcKind flow_group(FlowId id) const { return nodes_[flows_.at(id).node].group; }
    std::uint32_t flow_sender(FlowId id) const { return flows_.at(id).node; }
    const Link& access_link(std::uint32_t node) const { return nodes_.at(node).access; }
    const Link& bottleneck() const noexcept { return bottleneck_; }

    /// Opens flow `id` at the current simulated time.
    void start_flow(FlowId id);

    const SharedBufferQueue& queue() const noexcept { return queue_; }
    const TcpSender& sender(FlowId id) const { return flows_.at(id).sender; }
    const TcpReceiver& receiver(FlowId id) const { return flows_.at(id).receiver; }

    std::uint64_t goodput_bytes(FlowId id) const { return flows_.at(id).receiver.goodput_bytes(); }
    PerGroup<std::uint64_t> group_goodput() const;
    PerGroup<std::uint64_t> group_retransmits() const;

private:
    struct Node {
        CcKind group;
        Link access;
        std::deque<Packet> in_transit;
        std::deque<SimTime> nic_done;    // serialization end per queued packet
        std::deque<FlowId> blocked;      // flows waiting for NIC room
        bool wake_pending = false;
    };
    struct Flow {
        TcpSender sender;
        TcpReceiver receiver;
        std::uint32_t node;
        Duration reverse_delay;
        std::deque<Packet> acks_in_transit;
        EventHandle timer;
        std::optional<SimTime> timer_at;
        bool waiting_for_nic = false;
    };

    void send_from_node(std::uint32_t node, const Packet& pkt);
    std::uint32_t nic_room(Node& n);
    void prepare(Flow& f);
    void after_send(FlowId id);
    void nic_wake(std::uint32_t node);
    void arrive_at_switch(std::uint32_t node);
    void start_transmission();
    void transmission_done();
    void deliver_to_receiver(const Packet& pkt);
    void ack_arrives(FlowId id);
    void flush(Flow& f);
    void sync_timer(FlowId id);
    void timer_fires(FlowId id);

    Simulator& sim_;
    RandomSource red_rng_;
    RandomSource jitter_rng_;
    Duration host_jitter_;
    std::uint32_t host_queue_limit_;
    SharedBufferQueue queue_;
    Link bottleneck_;
    bool bottleneck_busy_ = false;
    Packet in_transmission_;
    std::deque<Packet> bottleneck_transit_;
    std::vector<Node> nodes_;
    std::vector<Flow> flows_;
    std::vector<Packet> scratch_;
};

/// Validates `spec` (throws std::invalid_argument) and builds the topology.
/// Flow ids are assigned DCTCP senders first, sender-major.
std::unique_ptr<Dumbbell> build_dumbbell(Simulator& sim, const DumbbellSpec& spec,
                                         const TransportParams& transport, RandomSource red_rng,
                                         RandomSource jitter_rng = RandomSource(0));

} // namespace dcsim
