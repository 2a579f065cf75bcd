#include "punchsim/nat.hpp"

#include <algorithm>

namespace punchsim {

NatDevice::NatDevice(NatConfig cfg, std::uint64_t rng_seed)
    : cfg_(cfg), rng_(rng_seed), sequential_next_(cfg.sequential_start) {}

NatDevice::MappingKey NatDevice::make_key(Endpoint src, Endpoint dst) const {
    MappingKey key;
    key.internal = src;
    switch (cfg_.mapping) {
    case MappingBehavior::Eim:
        break;
    case MappingBehavior::Adm:
        key.dst_address = dst.address;
        break;
    case MappingBehavior::Apdm:
        key.dst_address = dst.address;
        key.dst_port = dst.port;
        break;
    }
    return key;
}

Duration NatDevice::lifetime_of(const Mapping& m) const {
    if (m.internal.transport == Transport::Udp) return cfg_.udp_lifetime;
    return m.tcp_established ? cfg_.tcp_lifetime : cfg_.tcp_syn_lifetime;
}

bool NatDevice::mapping_live(const Mapping& m, SimTime now) const {
    return now - m.last_activity <= lifetime_of(m);
}

bool NatDevice::port_taken(Transport t, std::uint16_t port) const {
    if (by_external_.count({t, port})) return true;
    for (const auto& pm : static_mappings_)
        if (pm.transport == t && pm.external_port == port) return true;
    return false;
}

std::optional<std::uint16_t> NatDevice::allocate_port(Transport t) {
    const std::uint32_t lo = cfg_.exclude_system_ports ? 1024u : 0u;
    const std::uint32_t n = cfg_.port_space;
    if (n <= lo) return std::nullopt;
    if (cfg_.alloc == PortAllocPolicy::RandomUniform) {
        // Rejection sampling while the space is sparse, exact free-list
        // sampling once it is not.
        for (int i = 0; i < 64; ++i) {
            auto p = static_cast<std::uint16_t>(lo + rng_.below(n - lo));
            if (!port_taken(t, p)) return p;
        }
        std::vector<std::uint16_t> free_ports;
        for (std::uint32_t p = lo; p < n; ++p)
            if (!port_taken(t, static_cast<std::uint16_t>(p)))
                free_ports.push_back(static_cast<std::uint16_t>(p));
        if (free_ports.empty()) return std::nullopt;
        return free_ports[rng_.below(free_ports.size())];
    }
    // Sequential: wrap modulo the port space, skipping occupied ports.
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t p = (std::uint32_t(sequential_next_) + i) % n;
        if (p < lo) continue;
        if (!port_taken(t, static_cast<std::uint16_t>(p))) {
            sequential_next_ = static_cast<std::uint16_t>((p + 1) % n);
            return static_cast<std::uint16_t>(p);
        }
    }
    return std::nullopt;
}

std::variant<Endpoint, NatError> NatDevice::translate_outbound(Endpoint src, Endpoint dst,
                                                               SimTime now) {
    // A static pinhole owns its external port for outbound traffic too, so
    // replies leave from the port the peer was told about.
    for (const auto& pm : static_mappings_)
        if (pm.internal == src && (!pm.expires_at || now < *pm.expires_at))
            return Endpoint{cfg_.external_address, pm.external_port, src.transport};
    MappingKey key = make_key(src, dst);
    auto it = sessions_.find(key);
    if (it != sessions_.end() && mapping_live(it->second, now)) {
        Mapping& m = it->second;
        m.last_activity = std::max(m.last_activity, now);
        m.contacted.emplace(dst, now); // keeps the earliest contact time
        return m.external;
    }
    if (it != sessions_.end()) {
        // Stale entry for this key; drop it before re-allocating.
        by_external_.erase({it->second.external.transport, it->second.external.port});
        sessions_.erase(it);
    }
    if (sessions_.size() >= cfg_.session_capacity) return NatError::CapacityExceeded;
    auto port = allocate_port(src.transport);
    if (!port) return NatError::PortExhausted;

    Mapping m;
    m.internal = src;
    m.external = Endpoint{cfg_.external_address, *port, src.transport};
    m.created_at = now;
    m.last_activity = now;
    m.contacted.emplace(dst, now);
    by_external_[{src.transport, *port}] = key;
    sessions_.emplace(key, std::move(m));
    return Endpoint{cfg_.external_address, *port, src.transport};
}

bool NatDevice::is_denylisted(const Endpoint& src, SimTime now) const {
    auto it = denylist_.find(src);
    return it != denylist_.end() && now <= it->second;
}

void NatDevice::denylist_source(const Endpoint& src, SimTime now) {
    denylist_[src] = now + cfg_.denylist.expiry;
}

void NatDevice::note_inbound_syn(const Endpoint& src, SimTime now) {
    auto& hist = syn_history_[src];
    hist.push_back(now);
    while (!hist.empty() && hist.front() < now - cfg_.denylist.syn_flood_window)
        hist.pop_front();
}

bool NatDevice::syn_flood_exceeded(const Endpoint& src, SimTime now) {
    auto it = syn_history_.find(src);
    if (it == syn_history_.end()) return false;
    auto& hist = it->second;
    while (!hist.empty() && hist.front() < now - cfg_.denylist.syn_flood_window)
        hist.pop_front();
    return static_cast<int>(hist.size()) > cfg_.denylist.syn_flood_threshold;
}

FilterResult NatDevice::filter_inbound(Endpoint src, Endpoint dst_external, SimTime now,
                                       PacketKind kind) {
    if (is_denylisted(src, now)) return Drop{DropReason::Denylisted};

    if (cfg_.denylist.enabled && kind == PacketKind::Syn) {
        note_inbound_syn(src, now);
        if (syn_flood_exceeded(src, now)) {
            denylist_source(src, now);
            return Drop{DropReason::Denylisted};
        }
    }

    // Static pinholes bypass filtering.
    for (const auto& pm : static_mappings_) {
        if (pm.transport != dst_external.transport || pm.external_port != dst_external.port)
            continue;
        if (pm.expires_at && now > *pm.expires_at) continue;
        return Deliver{pm.internal};
    }

    auto ext_it = by_external_.find({dst_external.transport, dst_external.port});
    Mapping* m = nullptr;
    if (ext_it != by_external_.end()) {
        auto sess_it = sessions_.find(ext_it->second);
        if (sess_it != sessions_.end() && mapping_live(sess_it->second, now) &&
            sess_it->second.created_at < now)
            m = &sess_it->second;
    }
    if (!m) {
        if (cfg_.denylist.enabled && cfg_.denylist.unsolicited_udp_triggers &&
            src.transport == Transport::Udp)
            denylist_source(src, now);
        return Drop{DropReason::NoMapping};
    }

    bool admitted = false;
    switch (cfg_.filtering) {
    case FilteringBehavior::Eif:
        admitted = true;
        break;
    case FilteringBehavior::Adf:
        for (const auto& [dst, t] : m->contacted)
            if (dst.address == src.address && t < now) {
                admitted = true;
                break;
            }
        break;
    case FilteringBehavior::Apdf: {
        auto it = m->contacted.find(src);
        admitted = it != m->contacted.end() && it->second < now;
        break;
    }
    }
    if (!admitted) return Drop{DropReason::FilterMismatch};

    m->last_activity = std::max(m->last_activity, now);
    if (m->internal.transport == Transport::Tcp &&
        (kind == PacketKind::SynAck || kind == PacketKind::UdpDatagram))
        m->tcp_established = true;
    return Deliver{m->internal};
}

std::size_t NatDevice::expire(SimTime now) {
    std::size_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (!mapping_live(it->second, now)) {
            by_external_.erase({it->second.external.transport, it->second.external.port});
            it = sessions_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    for (auto it = denylist_.begin(); it != denylist_.end();) {
        if (now > it->second)
            it = denylist_.erase(it);
        else
            ++it;
    }
    std::erase_if(static_mappings_,
                  [&](const StaticPortMapping& pm) { return pm.expires_at && now > *pm.expires_at; });
    return removed;
}

void NatDevice::add_port_mapping(StaticPortMapping pm) {
    static_mappings_.push_back(pm);
}

std::optional<Endpoint> NatDevice::lookup_external(Endpoint src, Endpoint dst, SimTime now) const {
    auto it = sessions_.find(make_key(src, dst));
    if (it == sessions_.end() || !mapping_live(it->second, now)) return std::nullopt;
    return it->second.external;
}

} // namespace punchsim
