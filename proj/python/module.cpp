#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "punchsim/campaign.hpp"
#include "punchsim/oracle.hpp"

namespace py = pybind11;
using namespace punchsim;

namespace {

ScenarioConfig parse_scenario(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ScenarioConfig cfg = ScenarioConfig::from_json(j);
    cfg.validate();
    return cfg;
}

} // namespace

PYBIND11_MODULE(_punchsim, m) {
    m.doc() = "NAT hole-punching simulator core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<oracle::InvalidParams>(m, "InvalidParams", PyExc_ValueError);

    m.def(
        "birthday_success_prob",
        [](std::uint32_t m_open, std::uint32_t k_probe, std::uint32_t port_space, bool both_edm) {
            return oracle::birthday_success_prob({m_open, k_probe, port_space, both_edm});
        },
        py::arg("m_open"), py::arg("k_probe"), py::arg("port_space") = 65536,
        py::arg("both_edm") = false);

    m.def(
        "birthday_success_prob_independent",
        [](std::uint32_t m_open, std::uint32_t k_probe, std::uint32_t port_space) {
            return oracle::birthday_success_prob_independent({m_open, k_probe, port_space, false});
        },
        py::arg("m_open"), py::arg("k_probe"), py::arg("port_space") = 65536);

    m.def(
        "population_mix",
        [](double p_edm) {
            const oracle::PopulationMix mix = oracle::population_mix(p_edm);
            py::dict d;
            d["p_edm"] = mix.p_edm;
            d["eim_eim"] = mix.eim_eim;
            d["mixed"] = mix.mixed;
            d["edm_edm"] = mix.edm_edm;
            return d;
        },
        py::arg("p_edm"));

    m.def(
        "expected_improvement",
        [](double p_edm, double per_class_gain) {
            return oracle::expected_improvement(oracle::population_mix(p_edm), per_class_gain);
        },
        py::arg("p_edm"), py::arg("per_class_gain"));

    m.def(
        "sync_safe",
        [](std::int64_t timing_error_us, std::int64_t one_way_us) {
            return oracle::sync_safe({timing_error_us, one_way_us});
        },
        py::arg("timing_error_us"), py::arg("one_way_us"));

    m.def(
        "compute_wait_time",
        [](std::int64_t rtt_listener_initiator_us, std::int64_t rtt_listener_nat_us,
           std::int64_t rtt_initiator_nat_us, bool refined) {
            return compute_wait_time(
                {rtt_listener_initiator_us, rtt_listener_nat_us, rtt_initiator_nat_us}, refined);
        },
        py::arg("rtt_listener_initiator_us"), py::arg("rtt_listener_nat_us") = 0,
        py::arg("rtt_initiator_nat_us") = 0, py::arg("refined") = false);

    m.def("preset_names", &preset_names);

    m.def(
        "preset_json", [](const std::string& name) { return preset(name).to_json().dump(); },
        py::arg("name"));

    m.def(
        "run_campaign_json",
        [](const std::string& scenario_json, int jobs) {
            const ScenarioConfig cfg = parse_scenario(scenario_json);
            ResultSet rs;
            {
                py::gil_scoped_release release;
                rs = run_campaign(cfg, jobs);
            }
            const Report rep = aggregate(rs, cfg.min_network_samples);
            nlohmann::json results = nlohmann::json::array();
            for (const auto& r : rs.results) results.push_back(result_to_json(r));
            nlohmann::json out{{"scenario_digest", rs.scenario_digest},
                               {"seed", rs.seed},
                               {"report", rep.to_json()},
                               {"results", std::move(results)}};
            return out.dump();
        },
        py::arg("scenario_json"), py::arg("jobs") = 1);

    m.def(
        "run_birthday_trials",
        [](std::uint32_t m_open, std::uint32_t k_probe, std::uint32_t port_space,
           std::size_t trials, std::uint64_t seed, int jobs) {
            py::gil_scoped_release release;
            return run_birthday_trials(m_open, k_probe, port_space, trials, seed, jobs);
        },
        py::arg("m_open"), py::arg("k_probe"), py::arg("port_space"), py::arg("trials"),
        py::arg("seed"), py::arg("jobs") = 1);
}
