#pragma once

#include <cstdint>

#include "dcsim/sim_core.hpp"

namespace dcsim {

using FlowId = std::uint32_t;

constexpr std::uint32_t kDataWireBytes = 1500;
constexpr std::uint32_t kDataPayloadBytes = 1448;
constexpr std::uint32_t kAckWireBytes = 64;

/// A segment on the wire. Data packets travel sender -> switch -> receiver;
/// ACKs travel back on an ideal reverse path.
///
/// Invariants: ce implies ect; wire_len >= payload_len; ACKs carry no payload.
struct Packet {
    FlowId flow_id = 0;
    std::uint64_t seq = 0;      // first payload byte (data) or cumulative ack (ACK)
    std::uint32_t payload_len = 0;
    std::uint32_t wire_len = 0;
    bool is_ack = false;
    bool ect = false;
    bool ce = false;
    bool ece_echo = false;
    bool dsack = false;         // ACK: triggered by a segment the receiver already had
    SimTime send_time{0};
    SimTime ts_echo{0};         // ACK: send_time of the data packet being acknowledged

    static Packet data(FlowId flow, std::uint64_t seq, bool ect, SimTime now)
    {
        Packet p;
        p.flow_id = flow;
        p.seq = seq;
        p.payload_len = kDataPayloadBytes;
        p.wire_len = kDataWireBytes;
        p.ect = ect;
        p.send_time = now;
        return p;
    }

    static Packet ack(FlowId flow, std::uint64_t ack_no, bool ece, SimTime echo, SimTime now)
    {
        Packet p;
        p.flow_id = flow;
        p.seq = ack_no;
        p.wire_len = kAckWireBytes;
        p.is_ack = true;
        p.ece_echo = ece;
        p.ts_echo = echo;
        p.send_time = now;
        return p;
    }
};

} // namespace dcsim
