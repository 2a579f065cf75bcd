#include "punchsim/dcutr.hpp"

#include <cmath>

namespace punchsim {

namespace {

constexpr std::uint16_t kRelayPort = 4001;
constexpr int kConnectBytes = 96;
constexpr int kSyncBytes = 4;

// Signaling rides a reliable in-order relayed channel; a lost sample is
// retried until one gets through.
Duration signal_delay(Network& net, HostId from, HostId to, HostId relay) {
    for (int i = 0; i < 1000; ++i) {
        if (auto d = net.sample_one_way(from, to, relay)) return *d;
    }
    return sec(1);
}

Duration local_one_way(const Network& net, const PeerSpec& p) {
    if (p.is_public) return 0;
    return net.local_segment(p.host).forward.mean;
}

} // namespace

std::string to_string(AttemptOutcome o) {
    switch (o) {
    case AttemptOutcome::Unknown: return "UNKNOWN";
    case AttemptOutcome::DirectDial: return "DIRECT_DIAL";
    case AttemptOutcome::ProtocolError: return "PROTOCOL_ERROR";
    case AttemptOutcome::Cancelled: return "CANCELLED";
    case AttemptOutcome::Timeout: return "TIMEOUT";
    case AttemptOutcome::Failed: return "FAILED";
    case AttemptOutcome::Success: return "SUCCESS";
    }
    return "UNKNOWN";
}

std::string to_string(ResultOutcome o) {
    switch (o) {
    case ResultOutcome::Unknown: return "UNKNOWN";
    case ResultOutcome::NoConnection: return "NO_CONNECTION";
    case ResultOutcome::NoStream: return "NO_STREAM";
    case ResultOutcome::ConnectionReversed: return "CONNECTION_REVERSED";
    case ResultOutcome::Cancelled: return "CANCELLED";
    case ResultOutcome::Failed: return "FAILED";
    case ResultOutcome::Success: return "SUCCESS";
    }
    return "UNKNOWN";
}

std::optional<AttemptOutcome> attempt_outcome_from_string(const std::string& s) {
    for (auto o : {AttemptOutcome::Unknown, AttemptOutcome::DirectDial,
                   AttemptOutcome::ProtocolError, AttemptOutcome::Cancelled,
                   AttemptOutcome::Timeout, AttemptOutcome::Failed, AttemptOutcome::Success})
        if (to_string(o) == s) return o;
    return std::nullopt;
}

std::optional<ResultOutcome> result_outcome_from_string(const std::string& s) {
    for (auto o : {ResultOutcome::Unknown, ResultOutcome::NoConnection, ResultOutcome::NoStream,
                   ResultOutcome::ConnectionReversed, ResultOutcome::Cancelled,
                   ResultOutcome::Failed, ResultOutcome::Success})
        if (to_string(o) == s) return o;
    return std::nullopt;
}

std::string to_string(RttKind k) {
    switch (k) {
    case RttKind::ToRelay: return "TO_RELAY";
    case RttKind::ToRemoteThroughRelay: return "TO_REMOTE_THROUGH_RELAY";
    case RttKind::ToRemoteAfterHolePunch: return "TO_REMOTE_AFTER_HOLEPUNCH";
    }
    return "TO_RELAY";
}

Duration compute_wait_time(const RefinedTiming& t, bool refined) {
    if (!refined) return t.rtt_listener_initiator / 2;
    Duration w = (t.rtt_listener_initiator + t.rtt_listener_nat - t.rtt_initiator_nat) / 2;
    return w < 0 ? 0 : w;
}

std::optional<RttStats> measure_rtt(Network& net, HostId a, HostId b, std::optional<HostId> via,
                                    RttKind kind, int sample_count) {
    RttStats stats;
    stats.kind = kind;
    for (int i = 0; i < sample_count; ++i) {
        auto out = net.sample_one_way(a, b, via);
        auto back = net.sample_one_way(b, a, via);
        if (out && back) stats.samples.push_back(*out + *back);
    }
    if (stats.samples.empty()) return std::nullopt;
    double sum = 0;
    for (Duration s : stats.samples) sum += static_cast<double>(s);
    const double mean = sum / stats.samples.size();
    stats.mean = static_cast<Duration>(mean);
    if (stats.samples.size() > 1) {
        double ss = 0;
        for (Duration s : stats.samples) ss += (s - mean) * (s - mean);
        stats.stddev = static_cast<Duration>(std::sqrt(ss / (stats.samples.size() - 1)));
    }
    return stats;
}

ResultOutcome classify_outcome(const PunchTraceSummary& s) {
    if (s.cancelled) return ResultOutcome::Cancelled;
    if (!s.relayed_connected) return ResultOutcome::NoConnection;
    if (s.direct_connection && !s.stream_opened) return ResultOutcome::ConnectionReversed;
    if (!s.stream_opened) return ResultOutcome::NoStream;
    for (AttemptOutcome a : s.attempts)
        if (a == AttemptOutcome::Success) return ResultOutcome::Success;
    if (!s.attempts.empty()) return ResultOutcome::Failed;
    return ResultOutcome::Unknown;
}

ReversalResult try_connection_reversal(Network& net, const PeerSpec& initiator,
                                       const PeerSpec& listener, Transport transport) {
    Engine& eng = net.engine();
    std::vector<Endpoint> candidates;
    if (listener.is_public) {
        candidates.push_back(Endpoint{net.outer_address(listener.host), listener.listen_port,
                                      transport});
    } else if (const NatDevice* n = net.nat(listener.host)) {
        for (const auto& pm : n->port_mappings())
            if (pm.transport == transport)
                candidates.push_back(Endpoint{n->external_address(), pm.external_port, transport});
    }
    if (candidates.empty()) return ReversalResult::NotDialable;

    const Endpoint dialer_local{initiator.host, initiator.listen_port, transport};
    auto finish = [&](ReversalResult res) {
        net.set_handler(initiator.host, nullptr);
        net.set_handler(listener.host, nullptr);
        return res;
    };
    for (const Endpoint& target : candidates) {
        const SimTime deadline = eng.now() + sec(5);
        if (transport == Transport::Tcp) {
            DialSideSpec di{initiator.host, dialer_local, target, eng.now()};
            DialSideSpec dl{listener.host, Endpoint{listener.host, listener.listen_port, transport},
                            Endpoint{}, std::nullopt, /*passive_accept=*/true};
            TcpSimultaneousOpen open(net, di, dl, {}, deadline);
            open.start();
            eng.run_until(deadline);
            if (open.side_a().outcome == DialOutcome::Established)
                return finish(ReversalResult::Established);
        } else {
            QuicSideSpec qi{initiator.host, dialer_local, target, eng.now(), /*hello=*/true,
                            /*primes=*/false};
            QuicSideSpec ql{listener.host, Endpoint{listener.host, listener.listen_port, transport},
                            Endpoint{}, deadline, false, false};
            QuicHolePunch punch(net, qi, ql, QuicConfig{}, deadline);
            punch.start();
            eng.run_until(deadline);
            if (punch.client_established(0)) return finish(ReversalResult::Established);
        }
    }
    return finish(ReversalResult::NotDialable);
}

HolePunchResult run_hole_punch(Network& net, const PeerSpec& initiator, const PeerSpec& listener,
                               HostId relay, const PunchOptions& options) {
    Engine& eng = net.engine();
    HolePunchResult r;
    r.client = listener.host;
    r.remote = initiator.host;
    r.relay = relay;
    r.transport_filter = options.transport_filter;

    const bool tcp_ok = initiator.supports_tcp && listener.supports_tcp;
    const bool quic_ok = initiator.supports_quic && listener.supports_quic;
    std::optional<Transport> chosen;
    switch (options.transport_filter) {
    case TransportFilter::Tcp:
        if (tcp_ok) chosen = Transport::Tcp;
        break;
    case TransportFilter::Quic:
        if (quic_ok) chosen = Transport::Udp;
        break;
    case TransportFilter::Any:
        if (quic_ok)
            chosen = Transport::Udp;
        else if (tcp_ok)
            chosen = Transport::Tcp;
        break;
    }
    if (!chosen) return r; // no common transport: outcome UNKNOWN
    const Transport transport = *chosen;
    const bool quic = transport == Transport::Udp;

    if (const NatDevice* n = net.nat(listener.host)) {
        for (const auto& pm : n->port_mappings())
            r.port_mappings.push_back(PortMappingRecord{pm.internal.port, pm.external_port,
                                                        pm.transport, n->external_address()});
    }

    PunchTraceSummary trace;
    if (!net.routable(initiator.host, relay) || !net.routable(listener.host, relay)) {
        r.outcome = classify_outcome(trace); // NO_CONNECTION
        return r;
    }
    trace.relayed_connected = true;

    if (auto s = measure_rtt(net, listener.host, relay, std::nullopt, RttKind::ToRelay,
                             options.rtt_sample_count))
        r.rtts.push_back(*s);
    if (auto s = measure_rtt(net, listener.host, initiator.host, relay,
                             RttKind::ToRemoteThroughRelay, options.rtt_sample_count))
        r.rtts.push_back(*s);

    // Identify: learn observed external addresses by sending through the NAT.
    const Endpoint relay_ep{net.outer_address(relay), kRelayPort, transport};
    auto observe = [&](const PeerSpec& p) -> Endpoint {
        if (p.is_public) return Endpoint{net.outer_address(p.host), p.listen_port, transport};
        const Endpoint local{p.host, p.listen_port, transport};
        Packet pkt;
        pkt.src = local;
        pkt.dst = relay_ep;
        pkt.kind = transport == Transport::Tcp ? PacketKind::Syn : PacketKind::UdpDatagram;
        net.send(p.host, pkt);
        eng.run_all();
        auto ext = net.nat(p.host)->lookup_external(local, relay_ep, eng.now());
        return ext.value_or(Endpoint{0, 0, transport});
    };
    const Endpoint observed_initiator = observe(initiator);
    const Endpoint observed_listener = observe(listener);

    // Transport helpers register packet handlers scoped to this call; drop
    // them on exit so stale in-flight packets can't touch dead objects.
    auto clear_handlers = [&] {
        net.set_handler(initiator.host, nullptr);
        net.set_handler(listener.host, nullptr);
    };

    auto measure_direct = [&] {
        if (auto s = measure_rtt(net, listener.host, initiator.host, std::nullopt,
                                 RttKind::ToRemoteAfterHolePunch, options.rtt_sample_count)) {
            r.rtts.push_back(*s);
            r.direct_rtt = s->mean;
        }
    };

    if (options.enable_reversal &&
        try_connection_reversal(net, initiator, listener, transport) ==
            ReversalResult::Established) {
        trace.direct_connection = true;
        r.outcome = classify_outcome(trace); // CONNECTION_REVERSED
        r.transport_used = transport;
        measure_direct();
        clear_handlers();
        return r;
    }

    if (!initiator.supports_dcutr || !listener.supports_dcutr) {
        r.outcome = classify_outcome(trace); // NO_STREAM
        return r;
    }
    trace.stream_opened = true;

    // CONNECT / CONNECT: the exchange itself measures the relayed RTT.
    const Duration connect_out = signal_delay(net, initiator.host, listener.host, relay);
    const Duration connect_back = signal_delay(net, listener.host, initiator.host, relay);
    r.signal_bytes_to_listener += kConnectBytes;
    r.signal_bytes_to_initiator += kConnectBytes;
    r.relayed_rtt = connect_out + connect_back;
    eng.run_until(eng.now() + connect_out + connect_back);

    RefinedTiming timing;
    timing.rtt_listener_initiator = r.relayed_rtt;
    timing.rtt_listener_nat = 2 * local_one_way(net, listener);
    timing.rtt_initiator_nat = 2 * local_one_way(net, initiator);

    const NatDevice* nat_i = net.nat(initiator.host);
    const NatDevice* nat_l = net.nat(listener.host);
    const bool i_edm = nat_i && nat_i->config().mapping != MappingBehavior::Eim;
    const bool l_edm = nat_l && nat_l->config().mapping != MappingBehavior::Eim;

    const Endpoint initiator_local{initiator.host, initiator.listen_port, transport};
    const Endpoint listener_local{listener.host, listener.listen_port, transport};

    for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
        const bool swapped = options.alternate_roles && attempt % 2 == 0;
        const Duration sync_delay = signal_delay(net, initiator.host, listener.host, relay);
        r.signal_bytes_to_listener += kSyncBytes;
        const SimTime sync_sent = eng.now();
        const SimTime listener_act = sync_sent + sync_delay;
        const Duration t_wait = compute_wait_time(timing, options.refined_rtt);
        const SimTime initiator_act = sync_sent + t_wait + options.injected_timing_error;
        const SimTime deadline = sync_sent + options.attempt_timeout;

        HolePunchAttempt att;
        att.index = attempt;
        att.started_at = sync_sent;
        att.timing_error_observed = (initiator_act + local_one_way(net, initiator)) -
                                    (listener_act + local_one_way(net, listener));

        bool success = false;
        if (!quic) {
            DialSideSpec di{initiator.host, initiator_local, observed_listener, initiator_act};
            DialSideSpec dl{listener.host, listener_local, observed_initiator, listener_act};
            TcpSimultaneousOpen open(net, di, dl, options.extra_dial_offsets, deadline);
            open.start();
            eng.run_until(deadline);
            success = open.both_established();
        } else if (options.birthday && (i_edm || l_edm)) {
            // Opener = the EDM side (the primer when both are EDM).
            const bool opener_is_initiator = i_edm && !(l_edm && swapped);
            QuicSideSpec opener, prober;
            opener.host = opener_is_initiator ? initiator.host : listener.host;
            opener.local = opener_is_initiator ? initiator_local : listener_local;
            opener.target = opener_is_initiator ? observed_listener : observed_initiator;
            opener.act_time = opener_is_initiator ? initiator_act : listener_act;
            prober.host = opener_is_initiator ? listener.host : initiator.host;
            prober.local = opener_is_initiator ? listener_local : initiator_local;
            prober.target = opener_is_initiator ? observed_initiator : observed_listener;
            prober.act_time = opener_is_initiator ? listener_act : initiator_act;
            BirthdaySpec bs;
            bs.m_open = options.birthday->m_open;
            bs.k_probe = options.birthday->k_probe;
            const NatDevice* opener_nat = opener_is_initiator ? nat_i : nat_l;
            if (opener_nat) bs.port_space = opener_nat->config().port_space;
            BirthdayPunch punch(net, opener, prober, bs, deadline);
            punch.start();
            eng.run_until(deadline);
            success = punch.established();
            att.client_role_peer = prober.host;
        } else {
            QuicSideSpec qi{initiator.host, initiator_local, observed_listener, initiator_act,
                            /*hello=*/swapped, /*primes=*/!swapped};
            QuicSideSpec ql{listener.host, listener_local, observed_initiator, listener_act,
                            /*hello=*/!swapped, /*primes=*/swapped};
            QuicConfig qc;
            qc.priming_ttl = options.ttl_priming ? 3 : 64;
            qc.hello_retransmit_offsets = options.extra_dial_offsets;
            QuicHolePunch punch(net, qi, ql, qc, deadline);
            punch.start();
            eng.run_until(deadline);
            success = punch.established();
            att.client_role_peer = swapped ? initiator.host : listener.host;
        }

        att.outcome = success ? AttemptOutcome::Success : AttemptOutcome::Failed;
        trace.attempts.push_back(att.outcome);
        r.attempts.push_back(att);
        if (success) {
            trace.direct_connection = true;
            break;
        }
    }

    r.outcome = classify_outcome(trace);
    if (r.outcome == ResultOutcome::Success) {
        r.transport_used = transport;
        measure_direct();
        // the relayed connection is closed once the direct one is up
    }
    clear_handlers();
    return r;
}

} // namespace punchsim
