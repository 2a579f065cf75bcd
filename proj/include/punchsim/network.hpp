#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "punchsim/engine.hpp"
#include "punchsim/link.hpp"
#include "punchsim/nat.hpp"

namespace punchsim {

struct Packet {
    Endpoint src;
    Endpoint dst;
    PacketKind kind = PacketKind::UdpDatagram;
    int ttl = 64;
    int payload_size = 0;
    std::uint64_t trace_id = 0;
    std::uint8_t phase = 0; // transport handshake phase marker
};

enum class PacketFate : std::uint8_t {
    Delivered,
    TtlExpired,
    LinkLoss,
    NoMapping,
    FilterMismatch,
    Denylisted,
    Unroutable,
    CapacityExceeded,
    PortExhausted,
};

struct TraceEntry {
    SimTime time;
    std::uint64_t trace_id;
    PacketFate fate;
    PacketKind kind;
};

// Hosts, NAT attachments, local segments and core links; routes packets
// through the event engine with per-hop TTL accounting.
class Network {
public:
    using Handler = std::function<void(const Packet&, SimTime)>;

    Network(Engine& eng, std::uint64_t seed);

    HostId add_public_host(LinkModel local_segment = {});
    HostId add_nat_host(LinkModel local_segment, NatConfig cfg);

    // Core path between the outer attachment points of a and b; `core.forward`
    // is the a -> b direction.
    void connect(HostId a, HostId b, LinkModel core);

    void set_handler(HostId host, Handler h);

    std::uint64_t send(HostId from, Packet pkt);

    NatDevice* nat(HostId host);
    const NatDevice* nat(HostId host) const;
    HostId outer_address(HostId host) const;
    const LinkModel& local_segment(HostId host) const;
    bool routable(HostId from, HostId to) const;
    Engine& engine() { return eng_; }
    RngStream& rng() { return rng_; }

    const std::vector<TraceEntry>& trace() const { return trace_; }

    // Analytic one-way delay sample along host-to-host path (optionally via a
    // relay host); nullopt when a sampled leg loses the packet.
    std::optional<Duration> sample_one_way(HostId from, HostId to,
                                           std::optional<HostId> via = std::nullopt);

private:
    struct HostRec {
        HostId address;
        LinkModel local;
        std::optional<std::size_t> nat_index;
        Handler handler;
    };
    struct LinkRec {
        HostId from_outer;
        HostId to_outer;
        LinkModel model;
    };

    std::size_t host_index(HostId) const;
    const LinkRec* find_link(HostId a_outer, HostId b_outer, LinkDirection& dir) const;
    void record(SimTime t, std::uint64_t id, PacketFate fate, PacketKind kind);
    // Injects a packet at an outer attachment point (used for NAT RST reflexes).
    void send_from_outer(HostId at_outer, Packet pkt);
    void core_and_beyond(Packet pkt, HostId from_outer, SimTime t);
    void arrive_at_destination(Packet pkt, SimTime t);
    std::optional<Duration> leg(const LinkModel& m, LinkDirection d);

    Engine& eng_;
    RngStream rng_;
    std::vector<HostRec> hosts_;
    std::deque<NatDevice> nats_;
    std::map<HostId, std::size_t> nat_host_; // NAT external address -> host index
    std::map<HostId, std::size_t> by_address_;
    std::vector<LinkRec> links_;
    std::vector<TraceEntry> trace_;
    HostId next_address_ = 1;
    std::uint64_t next_trace_id_ = 0;
};

} // namespace punchsim
