#include "punchsim/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace punchsim {

namespace {

constexpr int kLocalHops = 2;
constexpr int kCoreHops = 10;

std::string mapping_name(MappingBehavior m) {
    switch (m) {
    case MappingBehavior::Eim: return "eim";
    case MappingBehavior::Adm: return "adm";
    case MappingBehavior::Apdm: return "apdm";
    }
    return "eim";
}

std::string filtering_name(FilteringBehavior f) {
    switch (f) {
    case FilteringBehavior::Eif: return "eif";
    case FilteringBehavior::Adf: return "adf";
    case FilteringBehavior::Apdf: return "apdf";
    }
    return "apdf";
}

std::string alloc_name(PortAllocPolicy a) {
    return a == PortAllocPolicy::Sequential ? "sequential" : "random";
}

MappingBehavior mapping_from(const std::string& s) {
    if (s == "eim") return MappingBehavior::Eim;
    if (s == "adm") return MappingBehavior::Adm;
    if (s == "apdm") return MappingBehavior::Apdm;
    throw ConfigError("unknown mapping behavior: " + s);
}

FilteringBehavior filtering_from(const std::string& s) {
    if (s == "eif") return FilteringBehavior::Eif;
    if (s == "adf") return FilteringBehavior::Adf;
    if (s == "apdf") return FilteringBehavior::Apdf;
    throw ConfigError("unknown filtering behavior: " + s);
}

PortAllocPolicy alloc_from(const std::string& s) {
    if (s == "random") return PortAllocPolicy::RandomUniform;
    if (s == "sequential") return PortAllocPolicy::Sequential;
    throw ConfigError("unknown allocator: " + s);
}

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

DelaySpec normal_spec(Duration mean, Duration std) {
    DelaySpec s;
    s.mean = mean;
    s.jitter_std = std;
    s.dist = std > 0 ? DelayDistribution::NormalTruncated : DelayDistribution::Constant;
    return s;
}

LinkModel local_link(const LatencyConfig& lat) {
    LinkModel l;
    l.forward = normal_spec(lat.local_mean, lat.local_std);
    l.backward = l.forward;
    l.forward_hops = kLocalHops;
    l.backward_hops = kLocalHops;
    return l;
}

// Core leg covering `frac` of the client->remote path; `asym` multiplies the
// client->remote direction and divides the reverse, preserving the RTT.
LinkModel core_link(const LatencyConfig& lat, double frac, double asym, double loss) {
    LinkModel l;
    const Duration m = static_cast<Duration>(lat.core_mean * frac);
    const Duration s = static_cast<Duration>(lat.core_std * frac);
    l.forward = normal_spec(static_cast<Duration>(m * asym), s);
    l.backward = normal_spec(static_cast<Duration>(m / asym), s);
    l.loss_prob = loss;
    l.forward_hops = kCoreHops;
    l.backward_hops = kCoreHops;
    return l;
}

const MixEntry& pick_archetype(const std::vector<MixEntry>& mix, double total, RngStream& rng) {
    double x = rng.uniform() * total;
    for (const auto& e : mix) {
        x -= e.weight;
        if (x <= 0) return e;
    }
    return mix.back();
}

TransportFilter pick_filter(const std::map<std::string, double>& weights, RngStream& rng) {
    double total = 0;
    for (const auto& [_, w] : weights) total += w;
    double x = rng.uniform() * total;
    for (const auto& [name, w] : weights) {
        x -= w;
        if (x <= 0) return *transport_filter_from_string(name);
    }
    return TransportFilter::Any;
}

HolePunchResult run_trial(const ScenarioConfig& cfg, std::uint64_t trial) {
    RngStream rng = RngStream::derive(cfg.seed, trial, 0);
    const MixEntry* client_arch;
    const MixEntry* remote_arch;
    {
        double total = 0;
        for (const auto& e : cfg.nat_mix) total += e.weight;
        client_arch = &pick_archetype(cfg.nat_mix, total, rng);
        remote_arch = &pick_archetype(cfg.nat_mix, total, rng);
    }
    const double frac = cfg.relay_position_min +
                        rng.uniform() * (cfg.relay_position_max - cfg.relay_position_min);
    const double asym = cfg.latency.asymmetry_min +
                        rng.uniform() * (cfg.latency.asymmetry_max - cfg.latency.asymmetry_min);
    const TransportFilter filter = pick_filter(cfg.transport_filter_weights, rng);
    const bool mapped = rng.uniform() < cfg.port_mapping_prevalence;

    Engine eng;
    Network net(eng, RngStream::mix(RngStream::mix(cfg.seed, trial), 1));
    const HostId relay = net.add_public_host();

    auto nat_cfg = [](const NatArchetype& a) {
        NatConfig c;
        c.mapping = a.mapping;
        c.filtering = a.filtering;
        c.alloc = a.alloc;
        return c;
    };
    // Client = listener, remote = initiator, matching the dataset's viewpoint.
    const HostId listener = net.add_nat_host(local_link(cfg.latency), nat_cfg(client_arch->archetype));
    const HostId initiator = net.add_nat_host(local_link(cfg.latency), nat_cfg(remote_arch->archetype));

    net.connect(listener, relay, core_link(cfg.latency, frac, asym, cfg.loss_prob));
    net.connect(relay, initiator, core_link(cfg.latency, 1.0 - frac, asym, cfg.loss_prob));
    net.connect(listener, initiator, core_link(cfg.latency, 1.0, asym, cfg.loss_prob));

    PeerSpec client;
    client.host = listener;
    client.has_port_mapping = mapped;
    PeerSpec remote;
    remote.host = initiator;

    if (mapped) {
        for (Transport t : {Transport::Udp, Transport::Tcp}) {
            StaticPortMapping pm;
            pm.internal = Endpoint{listener, client.listen_port, t};
            pm.external_port = client.listen_port;
            pm.transport = t;
            net.nat(listener)->add_port_mapping(pm);
        }
    }

    PunchOptions opts = cfg.options;
    opts.transport_filter = filter;

    HolePunchResult r = run_hole_punch(net, remote, client, relay, opts);
    r.network_id = client_arch->archetype.identity_hash();
    return r;
}

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    if (jobs == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(jobs, count);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

std::vector<double> quantiles(const std::vector<double>& v) {
    return {quantile(v, 0.10), quantile(v, 0.25), quantile(v, 0.50), quantile(v, 0.75),
            quantile(v, 0.90)};
}

} // namespace

std::uint64_t NatArchetype::identity_hash() const {
    return RngStream::mix(RngStream::mix(static_cast<std::uint64_t>(mapping),
                                         static_cast<std::uint64_t>(filtering)),
                          static_cast<std::uint64_t>(alloc));
}

std::string to_string(TransportFilter f) {
    switch (f) {
    case TransportFilter::Tcp: return "tcp";
    case TransportFilter::Quic: return "quic";
    case TransportFilter::Any: return "any";
    }
    return "any";
}

std::optional<TransportFilter> transport_filter_from_string(const std::string& s) {
    if (s == "tcp") return TransportFilter::Tcp;
    if (s == "quic") return TransportFilter::Quic;
    if (s == "any") return TransportFilter::Any;
    return std::nullopt;
}

void ScenarioConfig::validate() const {
    if (schema_version != 1) throw ConfigError("unsupported schema_version");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (nat_mix.empty()) throw ConfigError("nat_mix must not be empty");
    double total = 0;
    for (const auto& e : nat_mix) {
        if (e.weight < 0) throw ConfigError("nat_mix weights must be non-negative");
        total += e.weight;
    }
    if (total <= 0) throw ConfigError("nat_mix weights must sum to a positive value");
    if (port_mapping_prevalence < 0 || port_mapping_prevalence > 1)
        throw ConfigError("port_mapping_prevalence must be in [0,1]");
    if (relay_position_min < 0 || relay_position_max > 1 ||
        relay_position_min > relay_position_max)
        throw ConfigError("relay_position range must satisfy 0 <= min <= max <= 1");
    if (loss_prob < 0 || loss_prob >= 1) throw ConfigError("loss_prob must be in [0,1)");
    if (transport_filter_weights.empty())
        throw ConfigError("transport_filter_weights must not be empty");
    for (const auto& [name, w] : transport_filter_weights) {
        if (!transport_filter_from_string(name))
            throw ConfigError("unknown transport filter: " + name);
        if (w < 0) throw ConfigError("transport filter weights must be non-negative");
    }
    if (options.max_attempts < 1 || options.max_attempts > 3)
        throw ConfigError("max_attempts must be in [1,3]");
    if (latency.asymmetry_min <= 0 || latency.asymmetry_max < latency.asymmetry_min)
        throw ConfigError("asymmetry range must satisfy 0 < min <= max");
}

nlohmann::json ScenarioConfig::to_json() const {
    nlohmann::json mix = nlohmann::json::array();
    for (const auto& e : nat_mix)
        mix.push_back({{"mapping", mapping_name(e.archetype.mapping)},
                       {"filtering", filtering_name(e.archetype.filtering)},
                       {"allocator", alloc_name(e.archetype.alloc)},
                       {"weight", e.weight}});
    nlohmann::json opts{
        {"transport_filter", to_string(options.transport_filter)},
        {"max_attempts", options.max_attempts},
        {"attempt_timeout_ms", options.attempt_timeout / kMillisecond},
        {"enable_reversal", options.enable_reversal},
        {"alternate_roles", options.alternate_roles},
        {"refined_rtt", options.refined_rtt},
        {"ttl_priming", options.ttl_priming},
        {"rtt_sample_count", options.rtt_sample_count},
    };
    nlohmann::json offsets = nlohmann::json::array();
    for (Duration d : options.extra_dial_offsets) offsets.push_back(d / kMillisecond);
    opts["extra_dial_offsets_ms"] = offsets;
    if (options.birthday)
        opts["birthday"] = {{"m_open", options.birthday->m_open},
                            {"k_probe", options.birthday->k_probe}};
    else
        opts["birthday"] = nullptr;
    return nlohmann::json{
        {"schema_version", schema_version},
        {"name", name},
        {"trials", trials},
        {"seed", seed},
        {"nat_mix", mix},
        {"port_mapping_prevalence", port_mapping_prevalence},
        {"latency",
         {{"core_mean_ms", latency.core_mean / double(kMillisecond)},
          {"core_std_ms", latency.core_std / double(kMillisecond)},
          {"local_mean_ms", latency.local_mean / double(kMillisecond)},
          {"local_std_ms", latency.local_std / double(kMillisecond)},
          {"asymmetry_min", latency.asymmetry_min},
          {"asymmetry_max", latency.asymmetry_max}}},
        {"relay_position", {{"min", relay_position_min}, {"max", relay_position_max}}},
        {"transport_filter_weights", transport_filter_weights},
        {"loss_prob", loss_prob},
        {"options", opts},
        {"min_network_samples", min_network_samples},
    };
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    require_keys(j, {"schema_version", "name", "trials", "seed", "nat_mix",
                     "port_mapping_prevalence", "latency", "relay_position",
                     "transport_filter_weights", "loss_prob", "options", "min_network_samples"},
                 "scenario");
    ScenarioConfig c;
    if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1) throw ConfigError("unsupported schema_version");
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("trials")) c.trials = j.at("trials").get<std::uint64_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("nat_mix")) {
        c.nat_mix.clear();
        for (const auto& e : j.at("nat_mix")) {
            require_keys(e, {"mapping", "filtering", "allocator", "weight"}, "nat_mix entry");
            MixEntry m;
            m.archetype.mapping = mapping_from(e.at("mapping").get<std::string>());
            m.archetype.filtering = filtering_from(e.at("filtering").get<std::string>());
            if (e.contains("allocator"))
                m.archetype.alloc = alloc_from(e.at("allocator").get<std::string>());
            if (e.contains("weight")) m.weight = e.at("weight").get<double>();
            c.nat_mix.push_back(m);
        }
    }
    if (j.contains("port_mapping_prevalence"))
        c.port_mapping_prevalence = j.at("port_mapping_prevalence").get<double>();
    if (j.contains("latency")) {
        const auto& l = j.at("latency");
        require_keys(l, {"core_mean_ms", "core_std_ms", "local_mean_ms", "local_std_ms",
                         "asymmetry_min", "asymmetry_max"},
                     "latency");
        if (l.contains("core_mean_ms")) c.latency.core_mean = ms(l.at("core_mean_ms").get<double>());
        if (l.contains("core_std_ms")) c.latency.core_std = ms(l.at("core_std_ms").get<double>());
        if (l.contains("local_mean_ms"))
            c.latency.local_mean = ms(l.at("local_mean_ms").get<double>());
        if (l.contains("local_std_ms")) c.latency.local_std = ms(l.at("local_std_ms").get<double>());
        if (l.contains("asymmetry_min")) c.latency.asymmetry_min = l.at("asymmetry_min").get<double>();
        if (l.contains("asymmetry_max")) c.latency.asymmetry_max = l.at("asymmetry_max").get<double>();
    }
    if (j.contains("relay_position")) {
        const auto& r = j.at("relay_position");
        require_keys(r, {"min", "max"}, "relay_position");
        if (r.contains("min")) c.relay_position_min = r.at("min").get<double>();
        if (r.contains("max")) c.relay_position_max = r.at("max").get<double>();
    }
    if (j.contains("transport_filter_weights"))
        c.transport_filter_weights =
            j.at("transport_filter_weights").get<std::map<std::string, double>>();
    if (j.contains("loss_prob")) c.loss_prob = j.at("loss_prob").get<double>();
    if (j.contains("options")) {
        const auto& o = j.at("options");
        require_keys(o, {"transport_filter", "max_attempts", "attempt_timeout_ms",
                         "enable_reversal", "alternate_roles", "refined_rtt", "ttl_priming",
                         "birthday", "extra_dial_offsets_ms", "rtt_sample_count"},
                     "options");
        if (o.contains("transport_filter")) {
            auto f = transport_filter_from_string(o.at("transport_filter").get<std::string>());
            if (!f) throw ConfigError("unknown transport filter");
            c.options.transport_filter = *f;
        }
        if (o.contains("max_attempts")) c.options.max_attempts = o.at("max_attempts").get<int>();
        if (o.contains("attempt_timeout_ms"))
            c.options.attempt_timeout = ms(o.at("attempt_timeout_ms").get<double>());
        if (o.contains("enable_reversal"))
            c.options.enable_reversal = o.at("enable_reversal").get<bool>();
        if (o.contains("alternate_roles"))
            c.options.alternate_roles = o.at("alternate_roles").get<bool>();
        if (o.contains("refined_rtt")) c.options.refined_rtt = o.at("refined_rtt").get<bool>();
        if (o.contains("ttl_priming")) c.options.ttl_priming = o.at("ttl_priming").get<bool>();
        if (o.contains("birthday") && !o.at("birthday").is_null()) {
            const auto& b = o.at("birthday");
            require_keys(b, {"m_open", "k_probe"}, "birthday");
            BirthdaySettings bs;
            bs.m_open = b.at("m_open").get<int>();
            bs.k_probe = b.at("k_probe").get<int>();
            c.options.birthday = bs;
        }
        if (o.contains("extra_dial_offsets_ms")) {
            c.options.extra_dial_offsets.clear();
            for (const auto& d : o.at("extra_dial_offsets_ms"))
                c.options.extra_dial_offsets.push_back(ms(d.get<double>()));
        }
        if (o.contains("rtt_sample_count"))
            c.options.rtt_sample_count = o.at("rtt_sample_count").get<int>();
    }
    if (j.contains("min_network_samples"))
        c.min_network_samples = j.at("min_network_samples").get<std::size_t>();
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
    return from_json(j);
}

std::uint64_t ScenarioConfig::digest() const { return fnv1a(to_json().dump()); }

ResultSet run_campaign(const ScenarioConfig& config, int jobs) {
    config.validate();
    ResultSet rs;
    rs.scenario_digest = config.digest();
    rs.seed = config.seed;
    rs.results.resize(config.trials);
    parallel_for(config.trials, jobs,
                 [&](std::size_t i) { rs.results[i] = run_trial(config, i); });
    return rs;
}

Report aggregate(const ResultSet& rs, std::size_t min_network_samples) {
    if (rs.results.empty()) throw EmptyInput("empty result set");
    Report rep;
    rep.trials = rs.results.size();

    struct NetStat {
        std::size_t denom = 0;
        std::size_t succ = 0;
    };
    std::map<std::uint64_t, NetStat> nets;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_filter; // denom, succ
    std::map<int, std::pair<std::size_t, std::size_t>> bins;
    std::vector<double> latency_ratios;
    std::vector<double> rtt_dispersion;
    std::size_t successes = 0, first_attempt = 0;

    for (const auto& r : rs.results) {
        rep.outcome_histogram[to_string(r.outcome)]++;
        (r.port_mappings.empty() ? rep.outcome_histogram_unmapped
                                 : rep.outcome_histogram_mapped)[to_string(r.outcome)]++;

        for (const auto& s : r.rtts)
            if (s.mean > 0) rtt_dispersion.push_back(double(s.stddev) / double(s.mean));

        if (r.outcome == ResultOutcome::Success) {
            ++successes;
            if (!r.attempts.empty() && r.attempts.front().outcome == AttemptOutcome::Success)
                ++first_attempt;
            if (r.relayed_rtt > 0 && r.direct_rtt > 0)
                latency_ratios.push_back(double(r.direct_rtt) / double(r.relayed_rtt));
        }

        const bool in_denominator = (r.outcome == ResultOutcome::Success ||
                                     r.outcome == ResultOutcome::Failed) &&
                                    r.port_mappings.empty();
        if (!in_denominator) continue;
        const bool ok = r.outcome == ResultOutcome::Success;
        auto& n = nets[r.network_id];
        ++n.denom;
        n.succ += ok;
        auto& f = per_filter[to_string(r.transport_filter)];
        ++f.first;
        f.second += ok;

        // Relay position from the client's measured RTTs.
        Duration to_relay = 0, via_relay = 0;
        for (const auto& s : r.rtts) {
            if (s.kind == RttKind::ToRelay) to_relay = s.mean;
            if (s.kind == RttKind::ToRemoteThroughRelay) via_relay = s.mean;
        }
        if (to_relay > 0 && via_relay > 0) {
            int bin = static_cast<int>(double(to_relay) / double(via_relay) * 20.0);
            bin = std::clamp(bin, 0, 19);
            auto& b = bins[bin];
            ++b.first;
            b.second += ok;
        }
    }

    std::vector<double> rates;
    for (const auto& [_, n] : nets)
        if (n.denom >= min_network_samples) rates.push_back(double(n.succ) / double(n.denom));
    if (!rates.empty()) {
        rep.success_rate_defined = true;
        double sum = 0;
        for (double x : rates) sum += x;
        rep.success_rate_mean = sum / rates.size();
        double ss = 0;
        for (double x : rates) ss += (x - rep.success_rate_mean) * (x - rep.success_rate_mean);
        rep.success_rate_std = rates.size() > 1 ? std::sqrt(ss / (rates.size() - 1)) : 0.0;
    }
    rep.first_attempt_share = successes ? double(first_attempt) / double(successes) : 0.0;
    for (const auto& [name, f] : per_filter)
        rep.per_transport_success[name] = f.first ? double(f.second) / double(f.first) : 0.0;
    for (const auto& [bin, b] : bins) {
        rep.relay_position_curve[bin] = b.first ? double(b.second) / double(b.first) : 0.0;
        rep.relay_position_counts[bin] = b.first;
    }
    rep.latency_ratio_quantiles = quantiles(latency_ratios);
    rep.rtt_std_over_mean_quantiles = quantiles(rtt_dispersion);
    return rep;
}

nlohmann::json Report::to_json() const {
    return nlohmann::json{
        {"trials", trials},
        {"success_rate_defined", success_rate_defined},
        {"success_rate_mean", success_rate_mean},
        {"success_rate_std", success_rate_std},
        {"first_attempt_share", first_attempt_share},
        {"outcome_histogram", outcome_histogram},
        {"outcome_histogram_mapped", outcome_histogram_mapped},
        {"outcome_histogram_unmapped", outcome_histogram_unmapped},
        {"per_transport_success", per_transport_success},
        {"latency_ratio_quantiles", latency_ratio_quantiles},
        {"relay_position_curve", [&] {
             nlohmann::json j = nlohmann::json::object();
             for (const auto& [bin, rate] : relay_position_curve)
                 j[std::to_string(bin * 5) + "%"] = rate;
             return j;
         }()},
        {"rtt_std_over_mean_quantiles", rtt_std_over_mean_quantiles},
    };
}

nlohmann::json result_to_json(const HolePunchResult& r) {
    nlohmann::json attempts = nlohmann::json::array();
    for (const auto& a : r.attempts)
        attempts.push_back({{"index", a.index},
                            {"outcome", to_string(a.outcome)},
                            {"client_role_peer", a.client_role_peer},
                            {"timing_error_us", a.timing_error_observed},
                            {"started_at_us", a.started_at}});
    nlohmann::json rtts = nlohmann::json::array();
    for (const auto& s : r.rtts)
        rtts.push_back({{"mtype", to_string(s.kind)},
                        {"samples_us", s.samples},
                        {"mean_us", s.mean},
                        {"stddev_us", s.stddev}});
    nlohmann::json mappings = nlohmann::json::array();
    for (const auto& m : r.port_mappings)
        mappings.push_back({{"internal_port", m.internal_port},
                            {"external_port", m.external_port},
                            {"transport", m.transport == Transport::Tcp ? "TCP" : "UDP"},
                            {"external_address", m.external_address}});
    nlohmann::json j{
        {"client", r.client},
        {"remote", r.remote},
        {"relay", r.relay},
        {"network_id", r.network_id},
        {"outcome", to_string(r.outcome)},
        {"attempts", attempts},
        {"rtts", rtts},
        {"port_mappings", mappings},
        {"transport_filter", to_string(r.transport_filter)},
        {"relayed_rtt_us", r.relayed_rtt},
        {"direct_rtt_us", r.direct_rtt},
        {"signal_bytes_to_listener", r.signal_bytes_to_listener},
        {"signal_bytes_to_initiator", r.signal_bytes_to_initiator},
    };
    if (r.transport_used)
        j["transport_used"] = *r.transport_used == Transport::Tcp ? "TCP" : "QUIC";
    else
        j["transport_used"] = nullptr;
    return j;
}

HolePunchResult result_from_json(const nlohmann::json& j) {
    HolePunchResult r;
    r.client = j.at("client").get<HostId>();
    r.remote = j.at("remote").get<HostId>();
    r.relay = j.at("relay").get<HostId>();
    r.network_id = j.at("network_id").get<std::uint64_t>();
    if (auto o = result_outcome_from_string(j.at("outcome").get<std::string>())) r.outcome = *o;
    for (const auto& a : j.at("attempts")) {
        HolePunchAttempt at;
        at.index = a.at("index").get<int>();
        if (auto o = attempt_outcome_from_string(a.at("outcome").get<std::string>()))
            at.outcome = *o;
        at.client_role_peer = a.at("client_role_peer").get<HostId>();
        at.timing_error_observed = a.at("timing_error_us").get<Duration>();
        at.started_at = a.at("started_at_us").get<SimTime>();
        r.attempts.push_back(at);
    }
    for (const auto& s : j.at("rtts")) {
        RttStats st;
        const std::string mtype = s.at("mtype").get<std::string>();
        if (mtype == "TO_RELAY") st.kind = RttKind::ToRelay;
        else if (mtype == "TO_REMOTE_THROUGH_RELAY") st.kind = RttKind::ToRemoteThroughRelay;
        else if (mtype == "TO_REMOTE_AFTER_HOLEPUNCH") st.kind = RttKind::ToRemoteAfterHolePunch;
        else throw IoError("unknown mtype: " + mtype);
        st.samples = s.at("samples_us").get<std::vector<Duration>>();
        st.mean = s.at("mean_us").get<Duration>();
        st.stddev = s.at("stddev_us").get<Duration>();
        r.rtts.push_back(st);
    }
    for (const auto& m : j.at("port_mappings")) {
        PortMappingRecord pm;
        pm.internal_port = m.at("internal_port").get<std::uint16_t>();
        pm.external_port = m.at("external_port").get<std::uint16_t>();
        pm.transport = m.at("transport").get<std::string>() == "TCP" ? Transport::Tcp
                                                                     : Transport::Udp;
        pm.external_address = m.at("external_address").get<HostId>();
        r.port_mappings.push_back(pm);
    }
    if (auto f = transport_filter_from_string(j.at("transport_filter").get<std::string>()))
        r.transport_filter = *f;
    r.relayed_rtt = j.at("relayed_rtt_us").get<Duration>();
    r.direct_rtt = j.at("direct_rtt_us").get<Duration>();
    r.signal_bytes_to_listener = j.at("signal_bytes_to_listener").get<int>();
    r.signal_bytes_to_initiator = j.at("signal_bytes_to_initiator").get<int>();
    if (!j.at("transport_used").is_null())
        r.transport_used = j.at("transport_used").get<std::string>() == "TCP" ? Transport::Tcp
                                                                              : Transport::Udp;
    return r;
}

std::size_t export_results(const ResultSet& rs, ExportFormat format, const std::string& path) {
    std::ostringstream out;
    if (format == ExportFormat::JsonLines) {
        nlohmann::json head{{"scenario_digest", rs.scenario_digest}, {"seed", rs.seed}};
        out << head.dump() << '\n';
        for (const auto& r : rs.results) out << result_to_json(r).dump() << '\n';
    } else {
        out << "client,remote,relay,network_id,outcome,attempts,transport_filter,transport_used,"
               "relayed_rtt_us,direct_rtt_us,port_mapped,signal_bytes_to_listener,"
               "signal_bytes_to_initiator\n";
        for (const auto& r : rs.results) {
            std::string attempts;
            for (const auto& a : r.attempts) {
                if (!attempts.empty()) attempts += '|';
                attempts += to_string(a.outcome);
            }
            out << r.client << ',' << r.remote << ',' << r.relay << ',' << r.network_id << ','
                << to_string(r.outcome) << ',' << attempts << ',' << to_string(r.transport_filter)
                << ','
                << (r.transport_used ? (*r.transport_used == Transport::Tcp ? "TCP" : "QUIC") : "")
                << ',' << r.relayed_rtt << ',' << r.direct_rtt << ','
                << (r.port_mappings.empty() ? 0 : 1) << ',' << r.signal_bytes_to_listener << ','
                << r.signal_bytes_to_initiator << '\n';
        }
    }
    const std::string bytes = out.str();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << bytes;
    if (!f) throw IoError("write failed: " + path);
    return bytes.size();
}

ResultSet import_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    ResultSet rs;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("bad record: ") + e.what());
        }
        if (first) {
            rs.scenario_digest = j.at("scenario_digest").get<std::uint64_t>();
            rs.seed = j.at("seed").get<std::uint64_t>();
            first = false;
            continue;
        }
        rs.results.push_back(result_from_json(j));
    }
    if (first) throw IoError("missing header record: " + path);
    return rs;
}

std::size_t run_birthday_trials(std::uint32_t m_open, std::uint32_t k_probe,
                                std::uint32_t port_space, std::size_t trials, std::uint64_t seed,
                                int jobs) {
    std::atomic<std::size_t> successes{0};
    parallel_for(trials, jobs, [&](std::size_t trial) {
        Engine eng;
        Network net(eng, RngStream::mix(RngStream::mix(seed, trial), 2));
        NatConfig cfg;
        cfg.mapping = MappingBehavior::Apdm;
        cfg.filtering = FilteringBehavior::Apdf;
        cfg.alloc = PortAllocPolicy::RandomUniform;
        cfg.port_space = port_space;
        cfg.session_capacity = port_space;
        const HostId opener_host = net.add_nat_host(LinkModel::constant(ms(1)), cfg);
        const HostId prober_host = net.add_public_host();
        net.connect(opener_host, prober_host, LinkModel::constant(ms(1)));

        QuicSideSpec opener;
        opener.host = opener_host;
        opener.local = Endpoint{opener_host, 4001, Transport::Udp};
        opener.target = Endpoint{net.outer_address(prober_host), 4001, Transport::Udp};
        opener.act_time = 0;
        QuicSideSpec prober;
        prober.host = prober_host;
        prober.local = Endpoint{prober_host, 4001, Transport::Udp};
        prober.target = Endpoint{net.outer_address(opener_host), 0, Transport::Udp};
        prober.act_time = ms(50);

        BirthdaySpec bs;
        bs.m_open = static_cast<int>(m_open);
        bs.k_probe = static_cast<int>(k_probe);
        bs.port_space = port_space;
        const SimTime deadline = ms(50) + bs.probe_spacing * (k_probe + 2) + sec(1);
        BirthdayPunch punch(net, opener, prober, bs, deadline);
        punch.start();
        eng.run_until(deadline);
        if (punch.established()) successes.fetch_add(1);
    });
    return successes.load();
}

std::vector<std::string> preset_names() { return {"paper-like", "birthday-demo", "reversal-demo"}; }

ScenarioConfig preset(const std::string& name) {
    ScenarioConfig c;
    c.name = name;
    if (name == "paper-like") {
        // Illustrative population: absolute rates from real-world measurements
        // are not reproducible, properties are.
        c.trials = 10000;
        c.seed = 7;
        c.nat_mix = {
            {{MappingBehavior::Eim, FilteringBehavior::Apdf, PortAllocPolicy::RandomUniform}, 0.60},
            {{MappingBehavior::Eim, FilteringBehavior::Apdf, PortAllocPolicy::Sequential}, 0.29},
            {{MappingBehavior::Apdm, FilteringBehavior::Apdf, PortAllocPolicy::RandomUniform},
             0.11},
        };
        c.latency = LatencyConfig{ms(40), ms(8), ms(5), ms(1), 1.0, 1.0};
        c.relay_position_min = 0.3;
        c.relay_position_max = 0.9;
        c.transport_filter_weights = {{"tcp", 0.5}, {"quic", 0.5}};
        c.port_mapping_prevalence = 0.0;
    } else if (name == "birthday-demo") {
        c.trials = 200;
        c.seed = 11;
        c.nat_mix = {
            {{MappingBehavior::Eim, FilteringBehavior::Apdf, PortAllocPolicy::RandomUniform}, 0.5},
            {{MappingBehavior::Apdm, FilteringBehavior::Apdf, PortAllocPolicy::RandomUniform},
             0.5},
        };
        c.latency = LatencyConfig{ms(30), 0, ms(3), 0, 1.0, 1.0};
        c.transport_filter_weights = {{"quic", 1.0}};
        c.options.birthday = BirthdaySettings{256, 256};
    } else if (name == "reversal-demo") {
        c.trials = 500;
        c.seed = 13;
        c.nat_mix = {
            {{MappingBehavior::Eim, FilteringBehavior::Apdf, PortAllocPolicy::RandomUniform}, 1.0},
        };
        c.latency = LatencyConfig{ms(30), 0, ms(3), 0, 1.0, 1.0};
        c.port_mapping_prevalence = 0.3;
        c.transport_filter_weights = {{"any", 1.0}};
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return c;
}

} // namespace punchsim
