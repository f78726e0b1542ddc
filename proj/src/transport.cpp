#include "dcsim/transport.hpp"

#include <algorithm>
#include <cmath>

namespace dcsim {

namespace {
// appropriate byte counting, L = 2
constexpr double kSlowStartAbcLimit = 2.0;

constexpr Duration kHystartMinEta = 4ms;
constexpr Duration kHystartMaxEta = 16ms;
constexpr std::uint32_t kHystartSamples = 8;
} // namespace

bool hystart_on_sample(HystartState& h, const ConnectionState& conn, Duration rtt) noexcept
{
    if (conn.highest_acked >= h.round_end) {
        // a new round starts with the first ACK past the previous send front
        h.last_round_min = h.round_min;
        h.round_min.reset();
        h.samples = 0;
        h.round_end = conn.snd_nxt;
    }
    h.round_min = h.round_min ? std::min(*h.round_min, rtt) : rtt;
    ++h.samples;
    if (h.samples < kHystartSamples || !h.last_round_min)
        return false;
    const Duration eta = std::clamp(*h.last_round_min / 8, kHystartMinEta, kHystartMaxEta);
    return *h.round_min >= *h.last_round_min + eta;
}

const char* to_string(CcKind k) noexcept
{
    return k == CcKind::Dctcp ? "dctcp" : "cubic";
}

double dctcp_update_alpha(double alpha, double f, double g) noexcept
{
    return std::clamp((1.0 - g) * alpha + g * f, 0.0, 1.0);
}

void dctcp_on_epoch_end(ConnectionState& conn, DctcpState& d)
{
    const double f = d.bytes_acked_epoch == 0
                         ? 0.0
                         : static_cast<double>(d.bytes_marked_epoch) / static_cast<double>(d.bytes_acked_epoch);
    d.alpha = dctcp_update_alpha(d.alpha, f, d.g);

    const bool in_recovery = conn.phase == Phase::FastRecovery || conn.phase == Phase::RtoRecovery;
    if (d.bytes_marked_epoch > 0 && !d.ce_cut_done_this_window && !in_recovery) {
        conn.cwnd = std::max(1.0, conn.cwnd * (1.0 - d.alpha / 2.0));
        conn.ssthresh = conn.cwnd;
        conn.phase = Phase::Avoidance;
    }

    d.bytes_acked_epoch = 0;
    d.bytes_marked_epoch = 0;
    d.ce_cut_done_this_window = false;
    d.epoch_end_seq = conn.snd_nxt;
}

Duration cubic_k(double w_max, double beta, double c) noexcept
{
    return from_seconds(std::cbrt(w_max * (1.0 - beta) / c));
}

double cubic_target_window(Duration t_since_epoch, const CubicState& cs) noexcept
{
    const double dt = to_seconds(t_since_epoch - cs.k);
    return cs.c_scale * dt * dt * dt + cs.w_max;
}

void cubic_on_loss(CubicState& cs, ConnectionState& conn)
{
    // fast convergence: a flow losing below its previous peak releases
    // bandwidth by remembering a lower w_max
    if (cs.fast_convergence && conn.cwnd < cs.w_max_last)
        cs.w_max = conn.cwnd * (1.0 + cs.beta) / 2.0;
    else
        cs.w_max = conn.cwnd;
    cs.w_max_last = conn.cwnd;

    conn.cwnd = std::max(1.0, conn.cwnd * cs.beta);
    conn.ssthresh = std::max(2.0, conn.cwnd);
    cs.epoch_start.reset();
    cs.k = cubic_k(cs.w_max, cs.beta, cs.c_scale);
}

void cubic_on_ack_avoidance(CubicState& cs, ConnectionState& conn, double acked, SimTime now)
{
    if (!cs.epoch_start) {
        cs.epoch_start = now;
        if (conn.cwnd >= cs.w_max) {
            // no loss history above us: start the curve at the current window
            cs.w_max = conn.cwnd;
            cs.k = Duration{0};
        } else {
            cs.k = cubic_k(cs.w_max, cs.beta, cs.c_scale);
        }
        cs.w_est = conn.cwnd;
    }

    // Reno-equivalent window grows by 3(1-beta)/(1+beta) MSS per RTT
    cs.w_est += 3.0 * (1.0 - cs.beta) / (1.0 + cs.beta) * acked / conn.cwnd;

    const Duration t = now - *cs.epoch_start + conn.srtt;
    double target = cubic_target_window(t, cs);
    if (cs.reno_friendly && cs.w_est > target)
        target = cs.w_est;

    if (target > conn.cwnd) {
        // at most 1.5x per RTT
        double step = std::min((target - conn.cwnd) / conn.cwnd, 0.5);
        conn.cwnd += step * acked;
    } else {
        conn.cwnd += 0.01 * acked / conn.cwnd;
    }
}

TcpSender::TcpSender(FlowId id, CcKind kind, const TransportParams& params)
    : id_(id), params_(params), base_rto_(params.initial_rto)
{
    conn_.cc_kind = kind;
    conn_.cwnd = params.initial_cwnd;
    conn_.mss = params.mss;
    dctcp_.alpha = params.dctcp_initial_alpha;
    dctcp_.g = params.dctcp_g;
    cubic_.c_scale = params.cubic_c;
    cubic_.beta = params.cubic_beta;
    cubic_.reno_friendly = params.cubic_reno_friendly;
    cubic_.fast_convergence = params.cubic_fast_convergence;
}

Duration TcpSender::current_rto() const noexcept
{
    Duration rto = base_rto_;
    for (int i = 0; i < backoff_ && rto < params_.max_rto; ++i)
        rto *= 2;
    return std::min(rto, params_.max_rto);
}

void TcpSender::arm_timer(SimTime now)
{
    if (conn_.in_flight() == 0)
        rto_deadline_.reset();
    else
        rto_deadline_ = now + current_rto();
}

void TcpSender::start(SimTime now, std::vector<Packet>& out)
{
    started_ = true;
    send_available(now, out);
    dctcp_.epoch_end_seq = conn_.snd_nxt;
}

void TcpSender::emit_segment(std::uint64_t seq, SimTime now, std::vector<Packet>& out)
{
    const bool was_idle = conn_.in_flight() == 0 && !rto_deadline_;
    out.push_back(Packet::data(id_, seq, conn_.cc_kind == CcKind::Dctcp, now));
    ++stats_.segments_sent;
    if (seq < conn_.high_tx)
        ++stats_.retransmits;
    conn_.high_tx = std::max(conn_.high_tx, seq + conn_.mss);
    if (was_idle)
        rto_deadline_ = now + current_rto();
}

void TcpSender::send_available(SimTime now, std::vector<Packet>& out)
{
    constexpr auto unlimited = std::numeric_limits<std::uint32_t>::max();
    const auto window = static_cast<std::uint64_t>(std::floor(conn_.cwnd)) * conn_.mss;
    while (conn_.in_flight() + conn_.mss <= window) {
        if (tx_allowance_ == 0) {
            tx_blocked_ = true;
            max_out_cur_ = std::max(max_out_cur_, conn_.in_flight());
            return;
        }
        if (tx_allowance_ != unlimited)
            --tx_allowance_;
        emit_segment(conn_.snd_nxt, now, out);
        conn_.snd_nxt += conn_.mss;
    }
    tx_blocked_ = false;
    filled_cur_ = true;
    max_out_cur_ = std::max(max_out_cur_, conn_.in_flight());
}

void TcpSender::roll_use_round()
{
    if (conn_.highest_acked < use_round_end_)
        return;
    filled_prev_ = filled_cur_;
    max_out_prev_ = max_out_cur_;
    filled_cur_ = false;
    max_out_cur_ = conn_.in_flight();
    use_round_end_ = conn_.snd_nxt;
}

bool TcpSender::cwnd_limited() const noexcept
{
    if (filled_cur_ || filled_prev_)
        return true;
    const auto max_out = static_cast<double>(std::max(max_out_cur_, max_out_prev_));
    return conn_.cwnd < conn_.ssthresh && conn_.cwnd * static_cast<double>(conn_.mss) < 2.0 * max_out;
}

void TcpSender::pump(SimTime now, std::vector<Packet>& out)
{
    if (started_)
        send_available(now, out);
}

void TcpSender::update_rtt(Duration sample)
{
    if (!conn_.rtt_sampled) {
        conn_.srtt = sample;
        conn_.rttvar = sample / 2;
        conn_.rtt_sampled = true;
    } else {
        // one sample per ACK: spread the per-RTT gains over a window's worth
        // of samples so rttvar keeps the RTT-to-RTT variation
        const double n = std::max(1.0, std::ceil(conn_.cwnd));
        const double err = std::abs(static_cast<double>((sample - conn_.srtt).count()));
        const double rttvar = static_cast<double>(conn_.rttvar.count());
        const double srtt = static_cast<double>(conn_.srtt.count());
        conn_.rttvar = Duration{std::llround(rttvar + (err - rttvar) / (4.0 * n))};
        conn_.srtt = Duration{std::llround(srtt + static_cast<double>((sample - conn_.srtt).count()) / (8.0 * n))};
    }
    base_rto_ = std::clamp(conn_.srtt + 4 * conn_.rttvar, params_.min_rto, params_.max_rto);
}

void TcpSender::grow_window(double acked_mss, SimTime now)
{
    if (!cwnd_limited())
        return; // a window the sender cannot fill carries no growth signal
    if (conn_.cwnd < conn_.ssthresh) {
        conn_.cwnd += std::min(acked_mss, kSlowStartAbcLimit);
        if (conn_.cwnd >= conn_.ssthresh)
            conn_.phase = Phase::Avoidance;
        return;
    }
    conn_.phase = Phase::Avoidance;
    if (conn_.cc_kind == CcKind::Cubic)
        cubic_on_ack_avoidance(cubic_, conn_, std::min(acked_mss, conn_.cwnd), now);
    else
        conn_.cwnd += std::min(acked_mss, conn_.cwnd) / conn_.cwnd;
}

void TcpSender::loss_reaction()
{
    if (conn_.cc_kind == CcKind::Cubic) {
        cubic_on_loss(cubic_, conn_);
    } else {
        conn_.ssthresh = std::max(conn_.cwnd / 2.0, 2.0);
        dctcp_.ce_cut_done_this_window = true;
    }
}

void TcpSender::on_ack(const Packet& ack, SimTime now, std::vector<Packet>& out)
{
    if (!ack.is_ack || !started_)
        return;
    const std::uint64_t ack_no = ack.seq;
    if (ack_no < conn_.highest_acked || ack_no > conn_.high_tx)
        return; // regressing or acknowledging unsent data

    if (ack_no > conn_.highest_acked)
        on_new_ack(ack, ack_no - conn_.highest_acked, now, out);
    else if (conn_.in_flight() > 0 && !ack.dsack)
        on_dup_ack(ack, now, out); // a reported duplicate segment is no loss signal

    send_available(now, out);
}

void TcpSender::on_new_ack(const Packet& ack, std::uint64_t newly_acked, SimTime now, std::vector<Packet>& out)
{
    const Duration rtt_sample = now - ack.ts_echo;
    update_rtt(rtt_sample);
    backoff_ = 0;

    conn_.highest_acked = ack.seq;
    conn_.snd_nxt = std::max(conn_.snd_nxt, conn_.highest_acked);
    conn_.dup_ack_count = 0;
    roll_use_round();

    if (conn_.cc_kind == CcKind::Dctcp) {
        dctcp_.bytes_acked_epoch += newly_acked;
        if (ack.ece_echo)
            dctcp_.bytes_marked_epoch += newly_acked;
    }

    const double acked_mss = static_cast<double>(newly_acked) / conn_.mss;
    bool rearm = true;
    switch (conn_.phase) {
    case Phase::FastRecovery:
        if (ack.seq >= conn_.recover) {
            conn_.cwnd = std::max(1.0, conn_.ssthresh);
            conn_.phase = Phase::Avoidance;
        } else {
            // partial ACK: the next hole is lost too. Only the first one
            // restarts the timer, so a window with many holes falls back to
            // a timeout instead of repairing one hole per RTT.
            emit_segment(conn_.highest_acked, now, out);
            conn_.cwnd = std::max(1.0, conn_.cwnd - acked_mss + 1.0);
            rearm = partial_acks_++ == 0;
        }
        break;
    case Phase::RtoRecovery:
        // cumulative ACKs jump over segments the receiver buffered
        if (cwnd_limited())
            conn_.cwnd += conn_.cwnd < conn_.ssthresh ? std::min(acked_mss, kSlowStartAbcLimit)
                                                  : std::min(acked_mss, conn_.cwnd) / conn_.cwnd;
        if (ack.seq >= conn_.recover)
            conn_.phase = conn_.cwnd < conn_.ssthresh ? Phase::SlowStart : Phase::Avoidance;
        break;
    case Phase::SlowStart:
        if (conn_.cc_kind == CcKind::Cubic && params_.cubic_hystart &&
            hystart_on_sample(hystart_, conn_, rtt_sample)) {
            conn_.ssthresh = conn_.cwnd;
            conn_.phase = Phase::Avoidance;
        }
        grow_window(acked_mss, now);
        break;
    case Phase::Avoidance:
        grow_window(acked_mss, now);
        break;
    }

    if (conn_.cc_kind == CcKind::Dctcp && conn_.highest_acked >= dctcp_.epoch_end_seq)
        dctcp_on_epoch_end(conn_, dctcp_);

    if (rearm || conn_.in_flight() == 0)
        arm_timer(now);
}

void TcpSender::on_dup_ack(const Packet& ack, SimTime now, std::vector<Packet>& out)
{
    if (conn_.cc_kind == CcKind::Dctcp) {
        // a duplicate ACK still reports one delivered segment
        dctcp_.bytes_acked_epoch += conn_.mss;
        if (ack.ece_echo)
            dctcp_.bytes_marked_epoch += conn_.mss;
    }

    ++conn_.dup_ack_count;
    if (conn_.phase == Phase::FastRecovery) {
        conn_.cwnd += 1.0;
        return;
    }
    if (conn_.dup_ack_count == 3 && conn_.phase != Phase::RtoRecovery && conn_.highest_acked >= conn_.recover) {
        loss_reaction();
        conn_.recover = conn_.high_tx;
        conn_.phase = Phase::FastRecovery;
        partial_acks_ = 0;
        emit_segment(conn_.highest_acked, now, out);
        ++stats_.fast_retransmits;
        conn_.cwnd = conn_.ssthresh + 3.0;
    }
}

void TcpSender::on_rto(SimTime now, std::vector<Packet>& out)
{
    if (conn_.in_flight() == 0) {
        rto_deadline_.reset();
        return;
    }
    ++stats_.timeouts;

    // A timeout inside a recovery episode that already reduced the window
    // keeps that episode's ssthresh: one reduction per episode.
    const bool same_episode = conn_.phase == Phase::FastRecovery || conn_.phase == Phase::RtoRecovery;
    if (!same_episode) {
        const double cwnd_before = conn_.cwnd;
        if (conn_.cc_kind == CcKind::Cubic)
            cubic_on_loss(cubic_, conn_);
        else
            dctcp_.ce_cut_done_this_window = true;
        conn_.ssthresh = std::max(2.0, cwnd_before / 2.0);
    }
    conn_.cwnd = 1.0;
    conn_.recover = conn_.high_tx;
    conn_.phase = Phase::RtoRecovery;
    conn_.dup_ack_count = 0;
    conn_.snd_nxt = conn_.highest_acked;
    ++backoff_;

    rto_deadline_.reset();
    send_available(now, out);
    rto_deadline_ = now + current_rto();
}

Packet TcpReceiver::on_data(const Packet& data, SimTime now)
{
    const bool duplicate = data.seq + data.payload_len <= rcv_nxt_ || out_of_order_.contains(data.seq);
    if (data.seq == rcv_nxt_) {
        rcv_nxt_ += data.payload_len;
        auto it = out_of_order_.begin();
        while (it != out_of_order_.end() && it->first <= rcv_nxt_) {
            rcv_nxt_ = std::max(rcv_nxt_, it->first + it->second);
            it = out_of_order_.erase(it);
        }
    } else if (data.seq > rcv_nxt_) {
        out_of_order_.emplace(data.seq, data.payload_len);
    }
    Packet ack = Packet::ack(id_, rcv_nxt_, data.ce, data.send_time, now);
    ack.dsack = duplicate;
    return ack;
}

} // namespace dcsim
