#pragma once

#include <optional>
#include <string>
#include <vector>

#include "punchsim/transports.hpp"

namespace punchsim {

struct PeerSpec {
    HostId host = 0;
    bool is_public = false;
    bool has_port_mapping = false;
    bool supports_tcp = true;
    bool supports_quic = true;
    bool supports_dcutr = true;
    std::uint16_t listen_port = 4001;
};

enum class AttemptOutcome : std::uint8_t {
    Unknown,
    DirectDial,
    ProtocolError,
    Cancelled,
    Timeout,
    Failed,
    Success,
};

enum class ResultOutcome : std::uint8_t {
    Unknown,
    NoConnection,
    NoStream,
    ConnectionReversed,
    Cancelled,
    Failed,
    Success,
};

std::string to_string(AttemptOutcome);
std::string to_string(ResultOutcome);
std::optional<AttemptOutcome> attempt_outcome_from_string(const std::string&);
std::optional<ResultOutcome> result_outcome_from_string(const std::string&);

enum class RttKind : std::uint8_t { ToRelay, ToRemoteThroughRelay, ToRemoteAfterHolePunch };

// Dataset mtype strings.
std::string to_string(RttKind);

struct RttStats {
    RttKind kind = RttKind::ToRelay;
    std::vector<Duration> samples; // lost echoes excluded
    Duration mean = 0;
    Duration stddev = 0; // unbiased estimator

    friend bool operator==(const RttStats&, const RttStats&) = default;
};

// Inputs to the wait-time computation. The peer-to-peer RTT is measured over
// the relayed path; the two NAT legs come from topology ground truth.
struct RefinedTiming {
    Duration rtt_listener_initiator = 0;
    Duration rtt_listener_nat = 0;
    Duration rtt_initiator_nat = 0;
};

// Standard: half the relayed RTT. Refined: factors out the local segment
// latency on both sides, clamped at zero.
Duration compute_wait_time(const RefinedTiming& t, bool refined);

struct BirthdaySettings {
    int m_open = 256;
    int k_probe = 256;
};

enum class TransportFilter : std::uint8_t { Tcp, Quic, Any };

struct PunchOptions {
    TransportFilter transport_filter = TransportFilter::Any;
    int max_attempts = 3;
    Duration attempt_timeout = sec(15);
    bool enable_reversal = true;
    bool alternate_roles = false;
    bool refined_rtt = false;
    bool ttl_priming = false;
    std::optional<BirthdaySettings> birthday;
    // Retransmissions after the first dial, relative offsets; empty disables.
    std::vector<Duration> extra_dial_offsets = {sec(1), sec(3)};
    // Test hook: offset added to the initiator's wait timer.
    Duration injected_timing_error = 0;
    int rtt_sample_count = 10;
};

struct HolePunchAttempt {
    int index = 1;
    AttemptOutcome outcome = AttemptOutcome::Unknown;
    HostId client_role_peer = 0; // hello-sending side for QUIC; 0 for TCP
    Duration timing_error_observed = 0;
    SimTime started_at = 0;

    friend bool operator==(const HolePunchAttempt&, const HolePunchAttempt&) = default;
};

struct PortMappingRecord {
    std::uint16_t internal_port = 0;
    std::uint16_t external_port = 0;
    Transport transport = Transport::Udp;
    HostId external_address = 0;

    friend bool operator==(const PortMappingRecord&, const PortMappingRecord&) = default;
};

struct HolePunchResult {
    HostId client = 0; // the listener-side peer, as in the dataset
    HostId remote = 0;
    HostId relay = 0;
    std::uint64_t network_id = 0;
    ResultOutcome outcome = ResultOutcome::Unknown;
    std::vector<HolePunchAttempt> attempts;
    std::vector<RttStats> rtts;
    std::vector<PortMappingRecord> port_mappings;
    std::optional<Transport> transport_used;
    TransportFilter transport_filter = TransportFilter::Any;
    Duration relayed_rtt = 0;
    Duration direct_rtt = 0;
    int signal_bytes_to_listener = 0;
    int signal_bytes_to_initiator = 0;

    friend bool operator==(const HolePunchResult&, const HolePunchResult&) = default;
};

// Echo-style RTT measurement along a path; lost samples are excluded.
// Returns nullopt when every sample is lost.
std::optional<RttStats> measure_rtt(Network& net, HostId a, HostId b,
                                    std::optional<HostId> via, RttKind kind,
                                    int sample_count = 10);

enum class ReversalResult : std::uint8_t { Established, NotDialable };

// Direct dial of the listener's dialable addresses (public address or live
// port mapping), skipping the punch when it lands.
ReversalResult try_connection_reversal(Network& net, const PeerSpec& initiator,
                                       const PeerSpec& listener, Transport transport);

struct PunchTraceSummary {
    bool relayed_connected = false;
    bool stream_opened = false;
    bool direct_connection = false;
    bool cancelled = false;
    std::vector<AttemptOutcome> attempts;
};

ResultOutcome classify_outcome(const PunchTraceSummary& s);

// Full DCUtR flow: optional reversal, CONNECT/CONNECT with relayed RTT
// measurement, SYNC, synchronized dialing, up to max_attempts with optional
// role alternation, then outcome classification.
HolePunchResult run_hole_punch(Network& net, const PeerSpec& initiator, const PeerSpec& listener,
                               HostId relay, const PunchOptions& options);

} // namespace punchsim
