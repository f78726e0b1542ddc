#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <map>
#include <vector>

#include "dcsim/packet.hpp"
#include "dcsim/sim_core.hpp"

namespace dcsim {

enum class CcKind { Dctcp, Cubic };

const char* to_string(CcKind k) noexcept;

enum class Phase { SlowStart, Avoidance, FastRecovery, RtoRecovery };

/// Tunables shared by every connection of an experiment. Defaults follow the
/// published DCTCP and CUBIC algorithms.
struct TransportParams {
    std::uint32_t mss = kDataPayloadBytes;
    double initial_cwnd = 10.0;
    double dctcp_g = 1.0 / 16.0;
    double dctcp_initial_alpha = 1.0;
    double cubic_c = 0.4;
    double cubic_beta = 0.7;
    bool cubic_reno_friendly = true;
    bool cubic_fast_convergence = true;
    bool cubic_hystart = true; // delay-increase slow-start exit for CUBIC
    Duration min_rto = 1ms;
    Duration max_rto = 60s;
    Duration initial_rto = 1s;

    bool operator==(const TransportParams&) const = default;
};

/// Sender-side TCP state common to both algorithms. Windows are in MSS units.
struct ConnectionState {
    CcKind cc_kind = CcKind::Cubic;
    double cwnd = 10.0;
    double ssthresh = 1e18;
    std::uint32_t mss = kDataPayloadBytes;
    Duration srtt{0};
    Duration rttvar{0};
    bool rtt_sampled = false;
    std::uint64_t highest_acked = 0; // snd_una
    std::uint64_t snd_nxt = 0;
    std::uint64_t high_tx = 0;       // one past the highest byte ever sent
    std::uint64_t recover = 0;
    std::uint32_t dup_ack_count = 0;
    Phase phase = Phase::SlowStart;

    std::uint64_t in_flight() const noexcept { return snd_nxt - highest_acked; }
};

struct DctcpState {
    double alpha = 1.0;
    double g = 1.0 / 16.0;
    std::uint64_t bytes_acked_epoch = 0;
    std::uint64_t bytes_marked_epoch = 0;
    std::uint64_t epoch_end_seq = 0;
    bool ce_cut_done_this_window = false;
};

struct CubicState {
    double w_max = 0.0;
    double w_max_last = 0.0;
    std::optional<SimTime> epoch_start;
    Duration k{0};
    double c_scale = 0.4;
    double beta = 0.7;
    double w_est = 0.0;
    bool reno_friendly = true;
    bool fast_convergence = true;
};

/// Delay-increase slow-start exit: leave slow start once a round's minimum
/// RTT rises by clamp(last_min / 8, 4 ms, 16 ms) over the previous round's.
struct HystartState {
    std::uint64_t round_end = 0;
    std::optional<Duration> last_round_min;
    std::optional<Duration> round_min;
    std::uint32_t samples = 0;
};

/// Feeds one RTT sample taken in slow start; true when slow start should end.
bool hystart_on_sample(HystartState& h, const ConnectionState& conn, Duration rtt) noexcept;

/// alpha <- (1 - g) * alpha + g * f, clamped to [0, 1].
double dctcp_update_alpha(double alpha, double f, double g) noexcept;

/// End of a DCTCP observation window (one window of data acknowledged):
/// folds the marked fraction into alpha, applies at most one multiplicative
/// cut of alpha/2 if any byte was marked, and opens the next window at the
/// current send front.
void dctcp_on_epoch_end(ConnectionState& conn, DctcpState& d);

/// K = cbrt(w_max * (1 - beta) / C), the time the cubic curve takes to climb
/// back to w_max.
Duration cubic_k(double w_max, double beta, double c) noexcept;

/// W(t) = C * (t - K)^3 + w_max, in MSS units.
double cubic_target_window(Duration t_since_epoch, const CubicState& cs) noexcept;

/// Multiplicative decrease with fast convergence. Updates w_max/w_max_last,
/// sets cwnd and ssthresh to beta * cwnd (at least 1), resets the epoch.
void cubic_on_loss(CubicState& cs, ConnectionState& conn);

/// Congestion-avoidance growth for `acked` MSS worth of new acknowledgements.
void cubic_on_ack_avoidance(CubicState& cs, ConnectionState& conn, double acked, SimTime now);

struct SenderStats {
    std::uint64_t segments_sent = 0;
    std::uint64_t retransmits = 0;
    std::uint64_t fast_retransmits = 0;
    std::uint64_t timeouts = 0;
};

/// Bulk-transfer TCP sender (infinite backlog, never application-limited)
/// with NewReno loss recovery and a pluggable DCTCP or CUBIC window law.
///
/// The sender is clock-agnostic: callers pass `now` and collect emitted
/// segments in `out`. The retransmission timer is exposed as a deadline for
/// the caller to arm.
class TcpSender {
public:
    TcpSender(FlowId id, CcKind kind, const TransportParams& params);

    /// Opens the connection and emits the initial window.
    void start(SimTime now, std::vector<Packet>& out);

    void on_ack(const Packet& ack, SimTime now, std::vector<Packet>& out);

    /// Retransmission timeout; a no-op when nothing is outstanding.
    void on_rto(SimTime now, std::vector<Packet>& out);

    /// Sends whatever the window allows now, e.g. after the host NIC drained.
    void pump(SimTime now, std::vector<Packet>& out);

    /// Caps the new segments the next call may emit (host backpressure).
    /// Retransmissions are not counted. Unlimited by default.
    void set_tx_allowance(std::uint32_t n) noexcept { tx_allowance_ = n; }
    /// The last send attempt stopped on the allowance, not on the window.
    bool tx_blocked() const noexcept { return tx_blocked_; }

    std::optional<SimTime> rto_deadline() const noexcept { return rto_deadline_; }
    Duration current_rto() const noexcept;

    FlowId id() const noexcept { return id_; }
    bool started() const noexcept { return started_; }
    const ConnectionState& conn() const noexcept { return conn_; }
    const DctcpState& dctcp() const noexcept { return dctcp_; }
    const CubicState& cubic() const noexcept { return cubic_; }
    const HystartState& hystart() const noexcept { return hystart_; }
    const SenderStats& stats() const noexcept { return stats_; }

    // Test hooks for scripting specific window states.
    ConnectionState& mutable_conn() noexcept { return conn_; }
    DctcpState& mutable_dctcp() noexcept { return dctcp_; }

private:
    void send_available(SimTime now, std::vector<Packet>& out);
    void emit_segment(std::uint64_t seq, SimTime now, std::vector<Packet>& out);
    void on_new_ack(const Packet& ack, std::uint64_t newly_acked, SimTime now, std::vector<Packet>& out);
    void on_dup_ack(const Packet& ack, SimTime now, std::vector<Packet>& out);
    void grow_window(double acked_mss, SimTime now);
    void roll_use_round();
    bool cwnd_limited() const noexcept;
    void loss_reaction();
    void update_rtt(Duration sample);
    void arm_timer(SimTime now);

    FlowId id_;
    TransportParams params_;
    ConnectionState conn_;
    DctcpState dctcp_;
    CubicState cubic_;
    HystartState hystart_;
    SenderStats stats_;
    Duration base_rto_;
    int backoff_ = 0;
    int partial_acks_ = 0;
    std::optional<SimTime> rto_deadline_;
    bool started_ = false;
    std::uint32_t tx_allowance_ = std::numeric_limits<std::uint32_t>::max();
    bool tx_blocked_ = false;
    // Window use over the current and previous round: growth needs a window
    // the sender actually filled, or in slow start one at least half used.
    std::uint64_t use_round_end_ = 0;
    bool filled_cur_ = false;
    bool filled_prev_ = false;
    std::uint64_t max_out_cur_ = 0;
    std::uint64_t max_out_prev_ = 0;
};

/// Cumulative-ACK receiver. Buffers out-of-order segments, ACKs every data
/// segment immediately and reflects its CE bit as ECE.
class TcpReceiver {
public:
    explicit TcpReceiver(FlowId id) : id_(id) {}

    Packet on_data(const Packet& data, SimTime now);

    /// Unique in-order payload bytes delivered so far.
    std::uint64_t goodput_bytes() const noexcept { return rcv_nxt_; }

private:
    FlowId id_;
    std::uint64_t rcv_nxt_ = 0;
    std::map<std::uint64_t, std::uint32_t> out_of_order_; // seq -> payload length
};

} // namespace dcsim
