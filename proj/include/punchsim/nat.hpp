#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>
#include <variant>
#include <vector>

#include "punchsim/core.hpp"

namespace punchsim {

// RFC 4787 mapping behavior. EIM reuses one external endpoint per internal
// endpoint; ADM allocates per destination address; APDM per destination
// address and port ("symmetric NAT").
enum class MappingBehavior : std::uint8_t { Eim, Adm, Apdm };

// RFC 4787 filtering behavior. EIF admits any source once a mapping exists;
// ADF requires prior outbound to the source address; APDF to the exact
// source endpoint.
enum class FilteringBehavior : std::uint8_t { Eif, Adf, Apdf };

enum class PortAllocPolicy : std::uint8_t { RandomUniform, Sequential };

enum class PacketKind : std::uint8_t { Syn, SynAck, Rst, UdpDatagram, QuicHello, Signal };

struct DenylistPolicy {
    bool enabled = false;
    bool unsolicited_udp_triggers = false;
    int syn_flood_threshold = 16;              // SYNs per window per source
    Duration syn_flood_window = sec(10);
    Duration expiry = sec(300);
};

struct NatConfig {
    HostId external_address = 0;
    MappingBehavior mapping = MappingBehavior::Eim;
    FilteringBehavior filtering = FilteringBehavior::Apdf;
    PortAllocPolicy alloc = PortAllocPolicy::RandomUniform;
    std::uint16_t sequential_start = 1024;
    std::uint32_t port_space = 65536;          // N; ports allocated in [0, N)
    bool exclude_system_ports = false;         // restrict allocation to [1024, N)
    std::size_t session_capacity = 65536;
    Duration udp_lifetime = sec(120);
    Duration tcp_lifetime = sec(24 * 3600);
    Duration tcp_syn_lifetime = sec(60);
    DenylistPolicy denylist;
    // Stateful-firewall behavior: reply with RST when an inbound SYN is
    // dropped by the filter.
    bool rst_on_filtered_syn = true;
};

enum class NatError : std::uint8_t { CapacityExceeded, PortExhausted };

enum class DropReason : std::uint8_t { NoMapping, FilterMismatch, Denylisted };

struct Deliver {
    Endpoint internal;
};
struct Drop {
    DropReason reason;
};
using FilterResult = std::variant<Deliver, Drop>;

struct Mapping {
    Endpoint internal;
    Endpoint external;
    SimTime created_at = 0;
    SimTime last_activity = 0;
    bool tcp_established = false;
    // First outbound contact time per destination endpoint; drives ADF/APDF
    // admission. Admission requires contact strictly before arrival.
    std::map<Endpoint, SimTime> contacted;
};

// Static pinhole (UPnP/PMP-style port mapping): inbound to the external port
// is forwarded regardless of filtering state.
struct StaticPortMapping {
    Endpoint internal;
    std::uint16_t external_port = 0;
    Transport transport = Transport::Udp;
    std::optional<SimTime> expires_at;
};

// Stateful NAPT model: translation table keyed per mapping behavior, inbound
// filtering, port allocation, session capacity, expiry, and denylisting.
class NatDevice {
public:
    NatDevice(NatConfig cfg, std::uint64_t rng_seed);

    std::variant<Endpoint, NatError> translate_outbound(Endpoint src, Endpoint dst, SimTime now);
    FilterResult filter_inbound(Endpoint src, Endpoint dst_external, SimTime now,
                                PacketKind kind = PacketKind::UdpDatagram);
    std::size_t expire(SimTime now);

    void add_port_mapping(StaticPortMapping pm);
    const std::vector<StaticPortMapping>& port_mappings() const { return static_mappings_; }

    HostId external_address() const { return cfg_.external_address; }
    const NatConfig& config() const { return cfg_; }
    std::size_t session_count() const { return sessions_.size(); }
    bool is_denylisted(const Endpoint& src, SimTime now) const;

    // Live mapping for an internal endpoint toward dst, if any.
    std::optional<Endpoint> lookup_external(Endpoint src, Endpoint dst, SimTime now) const;

private:
    struct MappingKey {
        Endpoint internal;
        HostId dst_address = 0;    // 0 unless ADM/APDM
        std::uint16_t dst_port = 0; // 0 unless APDM
        friend auto operator<=>(const MappingKey&, const MappingKey&) = default;
    };

    MappingKey make_key(Endpoint src, Endpoint dst) const;
    Duration lifetime_of(const Mapping& m) const;
    bool mapping_live(const Mapping& m, SimTime now) const;
    std::optional<std::uint16_t> allocate_port(Transport t);
    bool port_taken(Transport t, std::uint16_t port) const;
    void denylist_source(const Endpoint& src, SimTime now);
    void note_inbound_syn(const Endpoint& src, SimTime now);
    bool syn_flood_exceeded(const Endpoint& src, SimTime now);

    NatConfig cfg_;
    RngStream rng_;
    std::map<MappingKey, Mapping> sessions_;
    // (transport, external port) -> session key, for inbound lookup.
    std::map<std::pair<Transport, std::uint16_t>, MappingKey> by_external_;
    std::vector<StaticPortMapping> static_mappings_;
    std::unordered_map<Endpoint, SimTime, EndpointHash> denylist_;     // src -> expiry
    std::unordered_map<Endpoint, std::deque<SimTime>, EndpointHash> syn_history_;
    std::uint16_t sequential_next_ = 0;
};

} // namespace punchsim
