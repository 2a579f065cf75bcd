#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "punchsim/dcutr.hpp"

#include "json.hpp"

namespace punchsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NatArchetype {
    MappingBehavior mapping = MappingBehavior::Eim;
    FilteringBehavior filtering = FilteringBehavior::Apdf;
    PortAllocPolicy alloc = PortAllocPolicy::RandomUniform;

    std::uint64_t identity_hash() const;
    friend bool operator==(const NatArchetype&, const NatArchetype&) = default;
};

struct MixEntry {
    NatArchetype archetype;
    double weight = 1.0;
};

struct LatencyConfig {
    Duration core_mean = ms(40);
    Duration core_std = 0;
    Duration local_mean = ms(5);
    Duration local_std = 0;
    double asymmetry_min = 1.0;
    double asymmetry_max = 1.0;
};

struct ScenarioConfig {
    int schema_version = 1;
    std::string name = "scenario";
    std::uint64_t trials = 1;
    std::uint64_t seed = 0;
    std::vector<MixEntry> nat_mix = {MixEntry{}};
    double port_mapping_prevalence = 0.0;
    LatencyConfig latency;
    double relay_position_min = 0.5;
    double relay_position_max = 0.5;
    // keys: "tcp", "quic", "any"
    std::map<std::string, double> transport_filter_weights = {{"any", 1.0}};
    double loss_prob = 0.0;
    PunchOptions options;
    std::size_t min_network_samples = 1;

    void validate() const;
    nlohmann::json to_json() const;
    // Rejects unknown keys and missing schema_version.
    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig load(const std::string& path);

    std::uint64_t digest() const;
};

struct ResultSet {
    std::uint64_t scenario_digest = 0;
    std::uint64_t seed = 0;
    std::vector<HolePunchResult> results;

    friend bool operator==(const ResultSet&, const ResultSet&) = default;
};

struct Report {
    std::size_t trials = 0;
    // Success rate across synthetic networks; the denominator keeps trials
    // with outcome SUCCESS or FAILED and no active port mapping.
    bool success_rate_defined = false;
    double success_rate_mean = 0.0;
    double success_rate_std = 0.0;
    double first_attempt_share = 0.0; // among successes
    std::map<std::string, std::size_t> outcome_histogram;
    std::map<std::string, std::size_t> outcome_histogram_mapped;
    std::map<std::string, std::size_t> outcome_histogram_unmapped;
    std::map<std::string, double> per_transport_success; // filter name -> rate
    std::vector<double> latency_ratio_quantiles;         // p10 p25 p50 p75 p90
    std::map<int, double> relay_position_curve;          // 5% bin -> success rate
    std::map<int, std::size_t> relay_position_counts;
    std::vector<double> rtt_std_over_mean_quantiles;     // p10 p25 p50 p75 p90

    nlohmann::json to_json() const;
};

// Runs the Monte Carlo campaign; trials are independent with RNG streams
// derived from (seed, trial index), so jobs > 1 changes nothing but wall
// time. jobs <= 0 means hardware concurrency.
ResultSet run_campaign(const ScenarioConfig& config, int jobs = 1);

Report aggregate(const ResultSet& rs, std::size_t min_network_samples = 1);

enum class ExportFormat : std::uint8_t { JsonLines, Csv };

std::size_t export_results(const ResultSet& rs, ExportFormat format, const std::string& path);
ResultSet import_results(const std::string& path);

nlohmann::json result_to_json(const HolePunchResult& r);
HolePunchResult result_from_json(const nlohmann::json& j);

// Birthday traversal measured through the full NAT + network stack: an APDM
// peer opens m ports toward a public prober, which dials k ports sampled
// without replacement. Returns the number of successful trials.
std::size_t run_birthday_trials(std::uint32_t m_open, std::uint32_t k_probe,
                                std::uint32_t port_space, std::size_t trials, std::uint64_t seed,
                                int jobs = 1);

// Bundled scenarios, keyed by preset name ("paper-like", ...).
std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

std::string to_string(TransportFilter f);
std::optional<TransportFilter> transport_filter_from_string(const std::string& s);

} // namespace punchsim
