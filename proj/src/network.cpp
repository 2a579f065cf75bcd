#include "punchsim/network.hpp"

#include <stdexcept>

namespace punchsim {

Network::Network(Engine& eng, std::uint64_t seed) : eng_(eng), rng_(seed) {}

HostId Network::add_public_host(LinkModel local_segment) {
    HostId addr = next_address_++;
    hosts_.push_back(HostRec{addr, local_segment, std::nullopt, nullptr});
    by_address_[addr] = hosts_.size() - 1;
    return addr;
}

HostId Network::add_nat_host(LinkModel local_segment, NatConfig cfg) {
    HostId addr = next_address_++;
    HostId external = next_address_++;
    cfg.external_address = external;
    nats_.emplace_back(cfg, RngStream::mix(rng_.next(), external));
    hosts_.push_back(HostRec{addr, local_segment, nats_.size() - 1, nullptr});
    by_address_[addr] = hosts_.size() - 1;
    nat_host_[external] = hosts_.size() - 1;
    return addr;
}

void Network::connect(HostId a, HostId b, LinkModel core) {
    links_.push_back(LinkRec{outer_address(a), outer_address(b), core});
}

void Network::set_handler(HostId host, Handler h) {
    hosts_[host_index(host)].handler = std::move(h);
}

std::size_t Network::host_index(HostId id) const {
    auto it = by_address_.find(id);
    if (it == by_address_.end()) throw std::out_of_range("unknown host id");
    return it->second;
}

NatDevice* Network::nat(HostId host) {
    auto& h = hosts_[host_index(host)];
    return h.nat_index ? &nats_[*h.nat_index] : nullptr;
}

const NatDevice* Network::nat(HostId host) const {
    const auto& h = hosts_[host_index(host)];
    return h.nat_index ? &nats_[*h.nat_index] : nullptr;
}

HostId Network::outer_address(HostId host) const {
    const auto& h = hosts_[host_index(host)];
    return h.nat_index ? nats_[*h.nat_index].external_address() : h.address;
}

const LinkModel& Network::local_segment(HostId host) const {
    return hosts_[host_index(host)].local;
}

const Network::LinkRec* Network::find_link(HostId a_outer, HostId b_outer,
                                           LinkDirection& dir) const {
    for (const auto& l : links_) {
        if (l.from_outer == a_outer && l.to_outer == b_outer) {
            dir = LinkDirection::Forward;
            return &l;
        }
        if (l.from_outer == b_outer && l.to_outer == a_outer) {
            dir = LinkDirection::Backward;
            return &l;
        }
    }
    return nullptr;
}

bool Network::routable(HostId from, HostId to) const {
    LinkDirection dir;
    return find_link(outer_address(from), outer_address(to), dir) != nullptr;
}

void Network::record(SimTime t, std::uint64_t id, PacketFate fate, PacketKind kind) {
    trace_.push_back(TraceEntry{t, id, fate, kind});
}

std::uint64_t Network::send(HostId from, Packet pkt) {
    auto& h = hosts_[host_index(from)];
    pkt.trace_id = ++next_trace_id_;
    const std::uint64_t id = pkt.trace_id;
    const SimTime t0 = eng_.now();
    const Duration dl = sample_delay(h.local, LinkDirection::Forward, rng_);
    const bool lost = h.local.loss_prob > 0 && rng_.uniform() < h.local.loss_prob;
    pkt.ttl -= h.local.forward_hops;
    if (lost) {
        eng_.at(t0 + dl, [this, id, k = pkt.kind] { record(eng_.now(), id, PacketFate::LinkLoss, k); });
        return id;
    }
    if (pkt.ttl < 0) {
        eng_.at(t0 + dl, [this, id, k = pkt.kind] { record(eng_.now(), id, PacketFate::TtlExpired, k); });
        return id;
    }
    if (h.nat_index) {
        std::size_t nat_idx = *h.nat_index;
        eng_.at(t0 + dl, [this, pkt, nat_idx]() mutable {
            NatDevice& dev = nats_[nat_idx];
            auto res = dev.translate_outbound(pkt.src, pkt.dst, eng_.now());
            if (auto* err = std::get_if<NatError>(&res)) {
                record(eng_.now(), pkt.trace_id,
                       *err == NatError::CapacityExceeded ? PacketFate::CapacityExceeded
                                                          : PacketFate::PortExhausted,
                       pkt.kind);
                return;
            }
            pkt.src = std::get<Endpoint>(res);
            core_and_beyond(pkt, dev.external_address(), eng_.now());
        });
    } else {
        HostId outer = h.address;
        eng_.at(t0 + dl, [this, pkt, outer]() mutable { core_and_beyond(pkt, outer, eng_.now()); });
    }
    return id;
}

void Network::send_from_outer(HostId at_outer, Packet pkt) {
    pkt.trace_id = ++next_trace_id_;
    core_and_beyond(pkt, at_outer, eng_.now());
}

void Network::core_and_beyond(Packet pkt, HostId from_outer, SimTime t) {
    LinkDirection dir;
    const LinkRec* link = find_link(from_outer, pkt.dst.address, dir);
    if (!link) {
        record(t, pkt.trace_id, PacketFate::Unroutable, pkt.kind);
        return;
    }
    const LinkModel& m = link->model;
    const Duration d = sample_delay(m, dir, rng_);
    if (m.loss_prob > 0 && rng_.uniform() < m.loss_prob) {
        eng_.at(t + d, [this, id = pkt.trace_id, k = pkt.kind] {
            record(eng_.now(), id, PacketFate::LinkLoss, k);
        });
        return;
    }
    const int hops = m.hops(dir);
    if (pkt.ttl - hops < 0) {
        // Dies partway along the core path, after the corresponding fraction
        // of the path delay.
        const double frac = hops > 0 ? static_cast<double>(pkt.ttl) / hops : 1.0;
        eng_.at(t + static_cast<Duration>(d * frac), [this, id = pkt.trace_id, k = pkt.kind] {
            record(eng_.now(), id, PacketFate::TtlExpired, k);
        });
        return;
    }
    pkt.ttl -= hops;
    eng_.at(t + d, [this, pkt]() mutable { arrive_at_destination(pkt, eng_.now()); });
}

void Network::arrive_at_destination(Packet pkt, SimTime t) {
    std::size_t hidx;
    if (auto nit = nat_host_.find(pkt.dst.address); nit != nat_host_.end()) {
        hidx = nit->second;
        NatDevice& dev = nats_[*hosts_[hidx].nat_index];
        FilterResult res = dev.filter_inbound(pkt.src, pkt.dst, t, pkt.kind);
        if (auto* drop = std::get_if<Drop>(&res)) {
            PacketFate fate = PacketFate::NoMapping;
            if (drop->reason == DropReason::FilterMismatch) fate = PacketFate::FilterMismatch;
            if (drop->reason == DropReason::Denylisted) fate = PacketFate::Denylisted;
            record(t, pkt.trace_id, fate, pkt.kind);
            if (pkt.kind == PacketKind::Syn && dev.config().rst_on_filtered_syn &&
                drop->reason != DropReason::Denylisted) {
                Packet rst;
                rst.src = pkt.dst;
                rst.dst = pkt.src;
                rst.kind = PacketKind::Rst;
                send_from_outer(pkt.dst.address, rst);
            }
            return;
        }
        pkt.dst = std::get<Deliver>(res).internal;
    } else if (auto it = by_address_.find(pkt.dst.address); it != by_address_.end()) {
        hidx = it->second;
    } else {
        record(t, pkt.trace_id, PacketFate::Unroutable, pkt.kind);
        return;
    }

    const HostRec& h = hosts_[hidx];
    const Duration dl = sample_delay(h.local, LinkDirection::Backward, rng_);
    if (h.local.loss_prob > 0 && rng_.uniform() < h.local.loss_prob) {
        eng_.at(t + dl, [this, id = pkt.trace_id, k = pkt.kind] {
            record(eng_.now(), id, PacketFate::LinkLoss, k);
        });
        return;
    }
    pkt.ttl -= h.local.backward_hops;
    if (pkt.ttl < 0) {
        eng_.at(t + dl, [this, id = pkt.trace_id, k = pkt.kind] {
            record(eng_.now(), id, PacketFate::TtlExpired, k);
        });
        return;
    }
    eng_.at(t + dl, [this, pkt, hidx] {
        record(eng_.now(), pkt.trace_id, PacketFate::Delivered, pkt.kind);
        const auto& handler = hosts_[hidx].handler;
        if (handler) handler(pkt, eng_.now());
    });
}

std::optional<Duration> Network::leg(const LinkModel& m, LinkDirection d) {
    if (m.loss_prob > 0 && rng_.uniform() < m.loss_prob) return std::nullopt;
    return sample_delay(m, d, rng_);
}

std::optional<Duration> Network::sample_one_way(HostId from, HostId to,
                                                std::optional<HostId> via) {
    const auto& hf = hosts_[host_index(from)];
    const auto& ht = hosts_[host_index(to)];
    Duration total = 0;
    if (auto d = leg(hf.local, LinkDirection::Forward))
        total += *d;
    else
        return std::nullopt;

    auto core = [&](HostId a, HostId b) -> std::optional<Duration> {
        LinkDirection dir;
        const LinkRec* l = find_link(outer_address(a), outer_address(b), dir);
        if (!l) return std::nullopt;
        if (l->model.loss_prob > 0 && rng_.uniform() < l->model.loss_prob) return std::nullopt;
        return sample_delay(l->model, dir, rng_);
    };

    if (via) {
        const auto& hv = hosts_[host_index(*via)];
        auto c1 = core(from, *via);
        if (!c1) return std::nullopt;
        auto lin = leg(hv.local, LinkDirection::Backward);
        if (!lin) return std::nullopt;
        auto lout = leg(hv.local, LinkDirection::Forward);
        if (!lout) return std::nullopt;
        auto c2 = core(*via, to);
        if (!c2) return std::nullopt;
        total += *c1 + *lin + *lout + *c2;
    } else {
        auto c = core(from, to);
        if (!c) return std::nullopt;
        total += *c;
    }
    if (auto d = leg(ht.local, LinkDirection::Backward))
        total += *d;
    else
        return std::nullopt;
    return total;
}

} // namespace punchsim
