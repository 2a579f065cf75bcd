#pragma once

#include <optional>
#include <vector>

#include "punchsim/network.hpp"

namespace punchsim {

enum class DialOutcome : std::uint8_t {
    Pending,
    Established,
    TimedOut,
    ResetReceived,
    Denylisted,
};

struct DialSideSpec {
    HostId host = 0;
    Endpoint local;                        // internal endpoint used for dialing
    Endpoint target;                       // counterpart's advertised external endpoint
    std::optional<SimTime> first_dial;     // absolute; nullopt = never dials
    bool passive_accept = false;           // listening socket: accept unexpected SYNs
    bool rst_on_unexpected_syn = true;
};

struct DialSideState {
    DialOutcome outcome = DialOutcome::Pending;
    SimTime established_at = 0;
    bool got_rst = false;
    bool half_open = false;
    bool sent_synack = false;
    int syns_sent = 0;
};

// TCP simultaneous open over the event engine. Crossing SYNs establish both
// sides; a SYN reaching a host with no half-open state elicits RST (unless
// the side accepts passively); a SYN dropped by the remote NAT filter draws
// an RST reflex from that NAT when so configured.
class TcpSimultaneousOpen {
public:
    TcpSimultaneousOpen(Network& net, DialSideSpec a, DialSideSpec b,
                        std::vector<Duration> retransmit_offsets, SimTime deadline);

    // Installs handlers and schedules dials plus finalization at the deadline.
    void start();

    const DialSideState& side_a() const { return state_[0]; }
    const DialSideState& side_b() const { return state_[1]; }
    bool both_established() const;

private:
    void dial(int side);
    void on_packet(int side, const Packet& pkt, SimTime now);
    void finalize(int side);

    Network& net_;
    DialSideSpec spec_[2];
    DialSideState state_[2];
    std::vector<Duration> retransmit_offsets_;
    SimTime deadline_;
};

struct QuicSideSpec {
    HostId host = 0;
    Endpoint local;
    Endpoint target;
    SimTime act_time = 0;
    bool sends_hello = false; // client role: dials QUIC_HELLO at act_time
    bool primes = false;      // server role: sends dummy datagrams at act_time
};

struct QuicConfig {
    int priming_count = 5;
    Duration priming_interval = ms(100);
    int priming_payload = 64;
    int priming_ttl = 64;
    std::vector<Duration> hello_retransmit_offsets = {sec(1), sec(3)};
};

// QUIC-over-UDP punching: the server side primes its NAT with dummy
// datagrams, the client side dials QUIC_HELLO. Handshake phases: 1 hello,
// 2 server reply, 3 client fin. When both sides send hellos, two distinct
// connections may complete.
class QuicHolePunch {
public:
    QuicHolePunch(Network& net, QuicSideSpec a, QuicSideSpec b, QuicConfig cfg, SimTime deadline);

    void start();

    bool client_established(int side) const { return client_done_[side]; }
    bool server_established(int side) const { return server_done_[side]; }
    // Completed connections (0..2); both-hello runs may produce two.
    int connection_count() const { return int(client_done_[0]) + int(client_done_[1]); }
    bool established() const { return connection_count() > 0; }
    SimTime established_at(int side) const { return client_done_at_[side]; }

private:
    void on_packet(int side, const Packet& pkt, SimTime now);

    Network& net_;
    QuicSideSpec spec_[2];
    QuicConfig cfg_;
    SimTime deadline_;
    bool client_done_[2] = {false, false};
    bool server_done_[2] = {false, false};
    SimTime client_done_at_[2] = {0, 0};
};

struct BirthdaySpec {
    int m_open = 256;
    int k_probe = 256;
    std::uint32_t port_space = 65536;
    Duration probe_spacing = ms(2);
    std::uint16_t opener_base_port = 20000;
};

// Birthday-paradox traversal against an endpoint-dependent-mapping NAT: the
// EDM side opens m distinct source ports toward the prober's advertised
// endpoint; the prober dials hellos at k external ports sampled without
// replacement. A collision completes a normal hello handshake.
class BirthdayPunch {
public:
    BirthdayPunch(Network& net, QuicSideSpec opener, QuicSideSpec prober, BirthdaySpec spec,
                  SimTime deadline);

    void start();

    bool established() const { return client_done_; }
    SimTime established_at() const { return client_done_at_; }

private:
    Network& net_;
    QuicSideSpec opener_;
    QuicSideSpec prober_;
    BirthdaySpec spec_;
    SimTime deadline_;
    bool client_done_ = false;
    SimTime client_done_at_ = 0;
};

} // namespace punchsim
