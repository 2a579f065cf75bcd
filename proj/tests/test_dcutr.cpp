#include "doctest.h"

#include "punchsim/dcutr.hpp"

using namespace punchsim;

namespace {

NatConfig nat(MappingBehavior m, FilteringBehavior f = FilteringBehavior::Apdf) {
    NatConfig c;
    c.mapping = m;
    c.filtering = f;
    return c;
}

// Relay topology: public relay, two NATed peers, constant delays throughout.
struct Topo {
    Engine eng;
    Network net;
    HostId relay, lst, ini;
    PeerSpec listener, initiator;

    Topo(NatConfig lcfg, NatConfig icfg, std::uint64_t seed = 21, Duration l_local = ms(1),
         Duration i_local = ms(1), Duration core = ms(20))
        : net(eng, seed) {
        relay = net.add_public_host();
        lst = net.add_nat_host(LinkModel::constant(l_local, 2), lcfg);
        ini = net.add_nat_host(LinkModel::constant(i_local, 2), icfg);
        net.connect(lst, relay, LinkModel::constant(core, 10));
        net.connect(ini, relay, LinkModel::constant(core, 10));
        net.connect(lst, ini, LinkModel::constant(core, 10));
        listener.host = lst;
        initiator.host = ini;
    }
};

PunchOptions quic_opts() {
    PunchOptions o;
    o.transport_filter = TransportFilter::Quic;
    o.enable_reversal = false;
    return o;
}

} // namespace

TEST_CASE("wait time: standard halves the relayed RTT, refined shifts by the NAT legs") {
    RefinedTiming t{ms(200), ms(40), ms(10)};
    CHECK(compute_wait_time(t, false) == ms(100));
    CHECK(compute_wait_time(t, true) == ms(115));
    RefinedTiming clamped{ms(10), 0, ms(50)};
    CHECK(compute_wait_time(clamped, true) == 0);
}

TEST_CASE("outcome and rtt-kind strings round-trip") {
    for (auto o : {AttemptOutcome::Unknown, AttemptOutcome::DirectDial,
                   AttemptOutcome::ProtocolError, AttemptOutcome::Cancelled,
                   AttemptOutcome::Timeout, AttemptOutcome::Failed, AttemptOutcome::Success})
        CHECK(attempt_outcome_from_string(to_string(o)) == o);
    for (auto o : {ResultOutcome::Unknown, ResultOutcome::NoConnection, ResultOutcome::NoStream,
                   ResultOutcome::ConnectionReversed, ResultOutcome::Cancelled,
                   ResultOutcome::Failed, ResultOutcome::Success})
        CHECK(result_outcome_from_string(to_string(o)) == o);
    CHECK(to_string(ResultOutcome::ConnectionReversed) == "CONNECTION_REVERSED");
    CHECK(to_string(RttKind::ToRemoteThroughRelay) == "TO_REMOTE_THROUGH_RELAY");
    CHECK(!attempt_outcome_from_string("bogus"));
    CHECK(!result_outcome_from_string("bogus"));
}

TEST_CASE("measure_rtt on constant links: exact mean, zero spread, via-relay sums the legs") {
    Engine eng;
    Network net(eng, 3);
    HostId a = net.add_public_host();
    HostId b = net.add_public_host();
    HostId r = net.add_public_host();
    net.connect(a, b, LinkModel::constant(ms(50)));
    net.connect(a, r, LinkModel::constant(ms(30)));
    net.connect(r, b, LinkModel::constant(ms(70)));

    auto direct = measure_rtt(net, a, b, std::nullopt, RttKind::ToRemoteAfterHolePunch);
    REQUIRE(direct.has_value());
    CHECK(direct->samples.size() == 10);
    CHECK(direct->mean == ms(100));
    CHECK(direct->stddev == 0);
    CHECK(direct->kind == RttKind::ToRemoteAfterHolePunch);

    auto relayed = measure_rtt(net, a, b, r, RttKind::ToRemoteThroughRelay, 4);
    REQUIRE(relayed.has_value());
    CHECK(relayed->samples.size() == 4);
    CHECK(relayed->mean == ms(200));
}

TEST_CASE("measure_rtt returns nullopt when every sample is lost") {
    Engine eng;
    Network net(eng, 3);
    HostId a = net.add_public_host();
    HostId b = net.add_public_host();
    LinkModel lossy = LinkModel::constant(ms(10));
    lossy.loss_prob = 1.0;
    net.connect(a, b, lossy);
    CHECK(!measure_rtt(net, a, b, std::nullopt, RttKind::ToRelay).has_value());
}

TEST_CASE("classification covers every row") {
    PunchTraceSummary s;
    s.cancelled = true;
    CHECK(classify_outcome(s) == ResultOutcome::Cancelled);
    s.cancelled = false;
    CHECK(classify_outcome(s) == ResultOutcome::NoConnection);
    s.relayed_connected = true;
    CHECK(classify_outcome(s) == ResultOutcome::NoStream);
    s.direct_connection = true;
    CHECK(classify_outcome(s) == ResultOutcome::ConnectionReversed);
    s.stream_opened = true;
    s.attempts = {AttemptOutcome::Failed, AttemptOutcome::Success};
    CHECK(classify_outcome(s) == ResultOutcome::Success);
    s.attempts = {AttemptOutcome::Failed, AttemptOutcome::Timeout};
    CHECK(classify_outcome(s) == ResultOutcome::Failed);
    s.attempts.clear();
    s.direct_connection = false;
    CHECK(classify_outcome(s) == ResultOutcome::Unknown);
}

TEST_CASE("connection reversal: public listener is dialable, unmapped NATed one is not") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    PeerSpec pub;
    pub.host = t.net.add_public_host();
    pub.is_public = true;
    t.net.connect(t.ini, pub.host, LinkModel::constant(ms(20), 10));
    CHECK(try_connection_reversal(t.net, t.initiator, pub, Transport::Tcp) ==
          ReversalResult::Established);
    CHECK(try_connection_reversal(t.net, t.initiator, t.listener, Transport::Tcp) ==
          ReversalResult::NotDialable);
}

TEST_CASE("connection reversal: static pinhole is dialable until it expires") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    StaticPortMapping pm;
    pm.internal = Endpoint{t.lst, 4001, Transport::Tcp};
    pm.external_port = 4001;
    pm.transport = Transport::Tcp;
    t.net.nat(t.lst)->add_port_mapping(pm);
    CHECK(try_connection_reversal(t.net, t.initiator, t.listener, Transport::Tcp) ==
          ReversalResult::Established);

    Topo u(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    pm.internal = Endpoint{u.lst, 4001, Transport::Tcp};
    pm.expires_at = u.eng.now(); // already expired
    u.net.nat(u.lst)->add_port_mapping(pm);
    CHECK(try_connection_reversal(u.net, u.initiator, u.listener, Transport::Tcp) ==
          ReversalResult::NotDialable);
}

TEST_CASE("hole punch: EIM peers on jitter-free links succeed on the first attempt") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, quic_opts());
    CHECK(r.outcome == ResultOutcome::Success);
    REQUIRE(r.attempts.size() == 1);
    CHECK(r.attempts[0].outcome == AttemptOutcome::Success);
    CHECK(r.attempts[0].timing_error_observed == 0);
    CHECK(r.transport_used == Transport::Udp);
    CHECK(r.relayed_rtt == ms(84));  // two relayed one-ways of 1+20+20+1 ms
    CHECK(r.direct_rtt == ms(44));   // 2 * (1+20+1) ms
    CHECK(r.signal_bytes_to_listener == 100);
    CHECK(r.signal_bytes_to_initiator == 96);
    REQUIRE(r.rtts.size() == 3);
    CHECK(r.rtts[0].kind == RttKind::ToRelay);
    CHECK(r.rtts[0].mean == ms(42));
    CHECK(r.rtts[1].kind == RttKind::ToRemoteThroughRelay);
    CHECK(r.rtts[2].kind == RttKind::ToRemoteAfterHolePunch);
    CHECK(r.client == t.lst);
    CHECK(r.remote == t.ini);
}

TEST_CASE("hole punch: role alternation rescues an address-filtered pair on attempt two") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Topo t(nat(MappingBehavior::Eim, FilteringBehavior::Adf),
               nat(MappingBehavior::Apdm, FilteringBehavior::Apdf), seed, ms(3));
        PunchOptions o = quic_opts();
        o.alternate_roles = true;
        auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, o);
        CHECK(r.outcome == ResultOutcome::Success);
        REQUIRE(r.attempts.size() == 2);
        CHECK(r.attempts[0].outcome == AttemptOutcome::Failed);
        CHECK(r.attempts[1].outcome == AttemptOutcome::Success);
        CHECK(r.attempts[1].client_role_peer == t.ini);
    }
}

TEST_CASE("hole punch: symmetric initiator without role alternation fails every attempt") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Apdm));
    PunchOptions o = quic_opts();
    o.extra_dial_offsets = {};
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, o);
    CHECK(r.outcome == ResultOutcome::Failed);
    REQUIRE(r.attempts.size() == 3);
    for (const auto& a : r.attempts) CHECK(a.outcome == AttemptOutcome::Failed);
    CHECK(r.signal_bytes_to_listener == 96 + 3 * 4);
    CHECK(r.signal_bytes_to_listener + r.signal_bytes_to_initiator <= 500);
}

TEST_CASE("hole punch: a late dialer misses attempt one; its leftover mapping saves attempt two") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    PunchOptions o = quic_opts();
    o.injected_timing_error = sec(6);
    o.extra_dial_offsets = {};
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, o);
    CHECK(r.outcome == ResultOutcome::Success);
    REQUIRE(r.attempts.size() == 2);
    CHECK(r.attempts[0].outcome == AttemptOutcome::Failed);
    CHECK(r.attempts[0].timing_error_observed == sec(6));
    CHECK(r.attempts[1].outcome == AttemptOutcome::Success);
}

TEST_CASE("hole punch: unreachable relay yields NO_CONNECTION") {
    Engine eng;
    Network net(eng, 4);
    HostId relay = net.add_public_host();
    PeerSpec listener, initiator;
    listener.host = net.add_nat_host(LinkModel::constant(ms(1), 2), nat(MappingBehavior::Eim));
    initiator.host = net.add_nat_host(LinkModel::constant(ms(1), 2), nat(MappingBehavior::Eim));
    net.connect(initiator.host, relay, LinkModel::constant(ms(20), 10));
    auto r = run_hole_punch(net, initiator, listener, relay, quic_opts());
    CHECK(r.outcome == ResultOutcome::NoConnection);
    CHECK(r.attempts.empty());
}

TEST_CASE("hole punch: no common transport yields UNKNOWN") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    t.listener.supports_quic = false;
    t.initiator.supports_tcp = false;
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, PunchOptions{});
    CHECK(r.outcome == ResultOutcome::Unknown);
    CHECK(r.attempts.empty());
    CHECK(!r.transport_used.has_value());
}

TEST_CASE("hole punch: a peer without stream support yields NO_STREAM") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    t.listener.supports_dcutr = false;
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, quic_opts());
    CHECK(r.outcome == ResultOutcome::NoStream);
    CHECK(r.attempts.empty());
}

TEST_CASE("hole punch: a mapped listener is reversed instead of punched") {
    Topo t(nat(MappingBehavior::Eim), nat(MappingBehavior::Eim));
    StaticPortMapping pm;
    pm.internal = Endpoint{t.lst, 4001, Transport::Udp};
    pm.external_port = 4001;
    pm.transport = Transport::Udp;
    t.net.nat(t.lst)->add_port_mapping(pm);
    t.listener.has_port_mapping = true;
    PunchOptions o = quic_opts();
    o.enable_reversal = true;
    auto r = run_hole_punch(t.net, t.initiator, t.listener, t.relay, o);
    CHECK(r.outcome == ResultOutcome::ConnectionReversed);
    CHECK(r.attempts.empty());
    REQUIRE(r.port_mappings.size() == 1);
    CHECK(r.port_mappings[0].external_port == 4001);
    CHECK(r.transport_used == Transport::Udp);
}

TEST_CASE("hole punch: identical seeds give identical results") {
    auto once = [](std::uint64_t seed) {
        Topo t(nat(MappingBehavior::Eim, FilteringBehavior::Adf),
               nat(MappingBehavior::Apdm, FilteringBehavior::Apdf), seed, ms(3));
        PunchOptions o = quic_opts();
        o.alternate_roles = true;
        return run_hole_punch(t.net, t.initiator, t.listener, t.relay, o);
    };
    CHECK(once(9) == once(9));
}
