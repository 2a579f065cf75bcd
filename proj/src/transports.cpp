#include "punchsim/transports.hpp"

#include <unordered_map>

namespace punchsim {

TcpSimultaneousOpen::TcpSimultaneousOpen(Network& net, DialSideSpec a, DialSideSpec b,
                                         std::vector<Duration> retransmit_offsets,
                                         SimTime deadline)
    : net_(net), spec_{a, b}, retransmit_offsets_(std::move(retransmit_offsets)),
      deadline_(deadline) {}

void TcpSimultaneousOpen::start() {
    for (int s = 0; s < 2; ++s) {
        net_.set_handler(spec_[s].host,
                         [this, s](const Packet& p, SimTime t) { on_packet(s, p, t); });
        if (spec_[s].first_dial) {
            net_.engine().at(*spec_[s].first_dial, [this, s] { dial(s); });
            for (Duration off : retransmit_offsets_)
                net_.engine().at(*spec_[s].first_dial + off, [this, s] { dial(s); });
        }
        net_.engine().at(deadline_, [this, s] { finalize(s); });
    }
}

void TcpSimultaneousOpen::dial(int side) {
    DialSideState& st = state_[side];
    if (st.outcome != DialOutcome::Pending) return;
    st.half_open = true;
    ++st.syns_sent;
    Packet syn;
    syn.src = spec_[side].local;
    syn.dst = spec_[side].target;
    syn.kind = PacketKind::Syn;
    net_.send(spec_[side].host, syn);
}

void TcpSimultaneousOpen::on_packet(int side, const Packet& pkt, SimTime now) {
    if (pkt.dst != spec_[side].local) return;
    DialSideState& st = state_[side];
    switch (pkt.kind) {
    case PacketKind::Syn: {
        if (st.half_open || st.outcome == DialOutcome::Established || spec_[side].passive_accept) {
            Packet ack;
            ack.src = pkt.dst;
            ack.dst = pkt.src;
            ack.kind = PacketKind::SynAck;
            net_.send(spec_[side].host, ack);
            st.sent_synack = true;
        } else if (spec_[side].rst_on_unexpected_syn) {
            Packet rst;
            rst.src = pkt.dst;
            rst.dst = pkt.src;
            rst.kind = PacketKind::Rst;
            net_.send(spec_[side].host, rst);
        }
        break;
    }
    case PacketKind::SynAck: {
        if (st.outcome == DialOutcome::Pending) {
            st.outcome = DialOutcome::Established;
            st.established_at = now;
            if (!st.sent_synack) {
                Packet ack;
                ack.src = pkt.dst;
                ack.dst = pkt.src;
                ack.kind = PacketKind::SynAck;
                net_.send(spec_[side].host, ack);
                st.sent_synack = true;
            }
        }
        break;
    }
    case PacketKind::Rst: {
        if (st.outcome == DialOutcome::Pending) {
            st.got_rst = true;
            st.half_open = false; // a later retransmit may re-open
        }
        break;
    }
    default:
        break;
    }
}

void TcpSimultaneousOpen::finalize(int side) {
    DialSideState& st = state_[side];
    if (st.outcome != DialOutcome::Pending) return;
    const int other = 1 - side;
    if (const NatDevice* remote_nat = net_.nat(spec_[other].host)) {
        // The dialer cannot tell a denylist from a timeout on the wire; the
        // attempt record reflects the ground truth for analysis.
        const NatDevice* own = net_.nat(spec_[side].host);
        Endpoint own_ext = spec_[side].local;
        if (own) {
            if (auto ext = own->lookup_external(spec_[side].local, spec_[side].target,
                                                net_.engine().now()))
                own_ext = *ext;
        }
        if (remote_nat->is_denylisted(own_ext, net_.engine().now())) {
            st.outcome = DialOutcome::Denylisted;
            return;
        }
    }
    st.outcome = st.got_rst ? DialOutcome::ResetReceived : DialOutcome::TimedOut;
}

bool TcpSimultaneousOpen::both_established() const {
    return state_[0].outcome == DialOutcome::Established &&
           state_[1].outcome == DialOutcome::Established;
}

QuicHolePunch::QuicHolePunch(Network& net, QuicSideSpec a, QuicSideSpec b, QuicConfig cfg,
                             SimTime deadline)
    : net_(net), spec_{a, b}, cfg_(std::move(cfg)), deadline_(deadline) {}

void QuicHolePunch::start() {
    for (int s = 0; s < 2; ++s) {
        net_.set_handler(spec_[s].host,
                         [this, s](const Packet& p, SimTime t) { on_packet(s, p, t); });
        const QuicSideSpec& sp = spec_[s];
        if (sp.primes) {
            for (int i = 0; i < cfg_.priming_count; ++i) {
                net_.engine().at(sp.act_time + i * cfg_.priming_interval, [this, s] {
                    Packet dgram;
                    dgram.src = spec_[s].local;
                    dgram.dst = spec_[s].target;
                    dgram.kind = PacketKind::UdpDatagram;
                    dgram.ttl = cfg_.priming_ttl;
                    dgram.payload_size = cfg_.priming_payload;
                    net_.send(spec_[s].host, dgram);
                });
            }
        }
        if (sp.sends_hello) {
            auto hello = [this, s] {
                if (client_done_[s]) return;
                Packet h;
                h.src = spec_[s].local;
                h.dst = spec_[s].target;
                h.kind = PacketKind::QuicHello;
                h.phase = 1;
                net_.send(spec_[s].host, h);
            };
            net_.engine().at(sp.act_time, hello);
            for (Duration off : cfg_.hello_retransmit_offsets)
                net_.engine().at(sp.act_time + off, hello);
        }
    }
}

void QuicHolePunch::on_packet(int side, const Packet& pkt, SimTime now) {
    if (pkt.dst != spec_[side].local) return;
    if (pkt.kind != PacketKind::QuicHello) return; // priming noise
    switch (pkt.phase) {
    case 1: { // client hello: reply as server
        Packet reply;
        reply.src = pkt.dst;
        reply.dst = pkt.src;
        reply.kind = PacketKind::QuicHello;
        reply.phase = 2;
        net_.send(spec_[side].host, reply);
        break;
    }
    case 2: { // handshake completes on our side; confirm to the server
        if (!client_done_[side]) {
            client_done_[side] = true;
            client_done_at_[side] = now;
            Packet fin;
            fin.src = pkt.dst;
            fin.dst = pkt.src;
            fin.kind = PacketKind::QuicHello;
            fin.phase = 3;
            net_.send(spec_[side].host, fin);
        }
        break;
    }
    case 3:
        server_done_[side] = true;
        break;
    default:
        break;
    }
}

BirthdayPunch::BirthdayPunch(Network& net, QuicSideSpec opener, QuicSideSpec prober,
                             BirthdaySpec spec, SimTime deadline)
    : net_(net), opener_(opener), prober_(prober), spec_(spec), deadline_(deadline) {}

void BirthdayPunch::start() {
    net_.set_handler(opener_.host, [this](const Packet& pkt, SimTime) {
        if (pkt.kind != PacketKind::QuicHello || pkt.phase != 1) return;
        Packet reply;
        reply.src = pkt.dst; // whichever opened port the probe landed on
        reply.dst = pkt.src;
        reply.kind = PacketKind::QuicHello;
        reply.phase = 2;
        net_.send(opener_.host, reply);
    });
    net_.set_handler(prober_.host, [this](const Packet& pkt, SimTime t) {
        if (pkt.kind != PacketKind::QuicHello || pkt.phase != 2) return;
        if (!client_done_) {
            client_done_ = true;
            client_done_at_ = t;
            Packet fin;
            fin.src = pkt.dst;
            fin.dst = pkt.src;
            fin.kind = PacketKind::QuicHello;
            fin.phase = 3;
            net_.send(prober_.host, fin);
        }
    });

    net_.engine().at(opener_.act_time, [this] {
        for (int i = 0; i < spec_.m_open; ++i) {
            Packet dgram;
            dgram.src = Endpoint{0, static_cast<std::uint16_t>(spec_.opener_base_port + i),
                                 opener_.local.transport};
            dgram.src.address = opener_.local.address;
            dgram.dst = opener_.target;
            dgram.kind = PacketKind::UdpDatagram;
            dgram.payload_size = 64;
            net_.send(opener_.host, dgram);
        }
    });

    net_.engine().at(prober_.act_time, [this] {
        // k distinct target ports via sparse Fisher-Yates.
        std::unordered_map<std::uint32_t, std::uint32_t> swapped;
        RngStream& rng = net_.rng();
        for (int i = 0; i < spec_.k_probe; ++i) {
            std::uint32_t j =
                static_cast<std::uint32_t>(i + rng.below(spec_.port_space - i));
            std::uint32_t pick = swapped.count(j) ? swapped[j] : j;
            std::uint32_t ival = swapped.count(i) ? swapped[std::uint32_t(i)] : std::uint32_t(i);
            swapped[j] = ival;
            const auto port = static_cast<std::uint16_t>(pick);
            net_.engine().after(i * spec_.probe_spacing, [this, port] {
                if (client_done_) return; // handshake already completed
                Packet h;
                h.src = prober_.local;
                h.dst = Endpoint{prober_.target.address, port, prober_.local.transport};
                h.kind = PacketKind::QuicHello;
                h.phase = 1;
                net_.send(prober_.host, h);
            });
        }
    });
}

} // namespace punchsim
