#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "punchsim/campaign.hpp"

using namespace punchsim;

namespace {

ScenarioConfig small_scenario() {
    ScenarioConfig c;
    c.name = "unit";
    c.trials = 60;
    c.seed = 42;
    c.nat_mix = {MixEntry{{MappingBehavior::Eim, FilteringBehavior::Apdf,
                           PortAllocPolicy::RandomUniform},
                          0.7},
                 MixEntry{{MappingBehavior::Apdm, FilteringBehavior::Apdf,
                           PortAllocPolicy::RandomUniform},
                          0.3}};
    c.latency.core_std = ms(2);
    c.latency.local_std = ms(1);
    c.relay_position_min = 0.3;
    c.relay_position_max = 0.9;
    c.options.transport_filter = TransportFilter::Any;
    return c;
}

struct TempPath {
    std::string path;
    explicit TempPath(const char* name) : path(std::string("/tmp/punchsim_test_") + name) {}
    ~TempPath() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("campaign runs are reproducible and independent of the job count") {
    ScenarioConfig c = small_scenario();
    ResultSet a = run_campaign(c, 1);
    ResultSet b = run_campaign(c, 1);
    ResultSet p = run_campaign(c, 4);
    CHECK(a == b);
    CHECK(a == p);
    CHECK(a.results.size() == c.trials);
}

TEST_CASE("all-EIM jitter-free scenario succeeds everywhere") {
    ScenarioConfig c;
    c.trials = 40;
    c.seed = 5;
    c.nat_mix = {MixEntry{}}; // EIM/APDF
    Report rep = aggregate(run_campaign(c));
    CHECK(rep.success_rate_defined);
    CHECK(rep.success_rate_mean == 1.0);
    CHECK(rep.first_attempt_share == 1.0);
    CHECK(rep.outcome_histogram.at("SUCCESS") == 40);
}

TEST_CASE("scenario json: round-trip, unknown keys, digest sensitivity") {
    ScenarioConfig c = small_scenario();
    nlohmann::json j = c.to_json();
    ScenarioConfig back = ScenarioConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.digest() == c.digest());

    nlohmann::json bad = j;
    bad["no_such_field"] = 1;
    CHECK_THROWS_AS(ScenarioConfig::from_json(bad), ConfigError);

    nlohmann::json missing = j;
    missing.erase("schema_version");
    CHECK_THROWS_AS(ScenarioConfig::from_json(missing), ConfigError);

    ScenarioConfig c2 = small_scenario();
    c2.seed = 43;
    CHECK(c2.digest() != c.digest());
}

TEST_CASE("scenario validation rejects bad parameters") {
    ScenarioConfig c = small_scenario();
    c.trials = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_scenario();
    c.port_mapping_prevalence = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_scenario();
    c.relay_position_min = 0.8;
    c.relay_position_max = 0.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_scenario();
    c.nat_mix.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_scenario();
    c.transport_filter_weights = {{"carrier-pigeon", 1.0}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("results survive a jsonl round trip") {
    ScenarioConfig c = small_scenario();
    c.trials = 25;
    ResultSet rs = run_campaign(c);
    TempPath f("roundtrip.jsonl");
    CHECK(export_results(rs, ExportFormat::JsonLines, f.path) > 0);
    ResultSet back = import_results(f.path);
    CHECK(back == rs);
}

TEST_CASE("result json uses the dataset vocabulary") {
    ScenarioConfig c = small_scenario();
    c.trials = 10;
    ResultSet rs = run_campaign(c);
    bool saw_outcome = false;
    for (const auto& r : rs.results) {
        nlohmann::json j = result_to_json(r);
        const std::string outcome = j.at("outcome");
        CHECK(result_outcome_from_string(outcome).has_value());
        saw_outcome = true;
        for (const auto& rtt : j.at("rtts")) {
            const std::string mtype = rtt.at("mtype");
            CHECK((mtype == "TO_RELAY" || mtype == "TO_REMOTE_THROUGH_RELAY" ||
                   mtype == "TO_REMOTE_AFTER_HOLEPUNCH"));
        }
        CHECK(result_from_json(j) == r);
    }
    CHECK(saw_outcome);
}

TEST_CASE("csv export writes a header even for an empty result set") {
    ResultSet rs;
    TempPath f("empty.csv");
    CHECK(export_results(rs, ExportFormat::Csv, f.path) > 0);
    std::ifstream in(f.path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header.find("outcome") != std::string::npos);
    std::string rest;
    CHECK(!std::getline(in, rest));
}

TEST_CASE("aggregating an empty result set reports the absence of data") {
    CHECK_THROWS_AS(aggregate(ResultSet{}), EmptyInput);
}

TEST_CASE("port-mapped trials reverse and stay out of the success-rate denominator") {
    ScenarioConfig c = small_scenario();
    c.trials = 120;
    c.port_mapping_prevalence = 0.5;
    ResultSet rs = run_campaign(c);
    Report rep = aggregate(rs);
    CHECK(rep.outcome_histogram_mapped.count("CONNECTION_REVERSED"));
    CHECK(rep.outcome_histogram_mapped["CONNECTION_REVERSED"] > 0);
    CHECK(!rep.outcome_histogram_unmapped.count("CONNECTION_REVERSED"));
    std::size_t mapped = 0;
    for (const auto& r : rs.results) mapped += r.port_mappings.empty() ? 0 : 1;
    CHECK(mapped > 30);
    CHECK(mapped < 90);
}

TEST_CASE("presets load, validate and stay distinct") {
    auto names = preset_names();
    REQUIRE(!names.empty());
    std::vector<std::uint64_t> digests;
    for (const auto& n : names) {
        ScenarioConfig c = preset(n);
        CHECK_NOTHROW(c.validate());
        digests.push_back(c.digest());
    }
    std::sort(digests.begin(), digests.end());
    CHECK(std::adjacent_find(digests.begin(), digests.end()) == digests.end());
    CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("transport filter names round-trip") {
    for (auto f : {TransportFilter::Tcp, TransportFilter::Quic, TransportFilter::Any})
        CHECK(transport_filter_from_string(to_string(f)) == f);
    CHECK(!transport_filter_from_string("smoke-signal"));
}

TEST_CASE("birthday trial harness finds the trivially dense case") {
    // m just below the port space makes nearly every probe a hit.
    CHECK(run_birthday_trials(63, 64, 64, 4, 99) == 4);
}
