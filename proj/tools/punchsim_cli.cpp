#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "punchsim/campaign.hpp"
#include "punchsim/oracle.hpp"

namespace {

using namespace punchsim;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("PUNCHSIM_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

void apply_enables(PunchOptions& opts, const std::vector<std::string>& flags,
                   const std::string& birthday_mk) {
    for (const auto& f : flags) {
        if (f == "reversal")
            opts.enable_reversal = true;
        else if (f == "alternate-roles")
            opts.alternate_roles = true;
        else if (f == "refined-rtt")
            opts.refined_rtt = true;
        else if (f == "ttl-priming")
            opts.ttl_priming = true;
        else if (f == "birthday")
            opts.birthday = opts.birthday.value_or(BirthdaySettings{});
        else
            throw ConfigError("unknown --enable value: " + f);
    }
    if (!birthday_mk.empty()) {
        const auto comma = birthday_mk.find(',');
        if (comma == std::string::npos) throw ConfigError("--birthday expects m,k");
        BirthdaySettings bs;
        bs.m_open = std::stoi(birthday_mk.substr(0, comma));
        bs.k_probe = std::stoi(birthday_mk.substr(comma + 1));
        opts.birthday = bs;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic NAT hole-punching simulator and analytic calculators"};
    app.require_subcommand(1);
    app.fallthrough(); // lets --precision appear after the subcommand
    int precision = 4;
    app.add_option("--precision", precision, "decimal places for numeric output");

    // run
    auto* run = app.add_subcommand("run", "run a Monte Carlo campaign");
    std::string scenario_path, out_dir = ".", transport, birthday_mk, preset_name;
    std::uint64_t seed = default_seed();
    std::uint64_t trials = 0;
    int jobs = 0;
    std::vector<std::string> enables;
    run->add_option("--scenario", scenario_path, "scenario JSON file");
    run->add_option("--preset", preset_name, "bundled preset name instead of a file");
    run->add_option("--seed", seed, "master RNG seed (or PUNCHSIM_SEED)");
    run->add_option("--trials", trials, "override trial count");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--transport", transport, "tcp|quic|any");
    run->add_option("--enable", enables,
                    "reversal,alternate-roles,refined-rtt,birthday,ttl-priming")
        ->delimiter(',');
    run->add_option("--birthday", birthday_mk, "birthday m,k");
    run->add_option("--jobs", jobs, "worker threads (0 = cores)");

    // oracle
    auto* oracle_cmd = app.add_subcommand("oracle", "closed-form calculators");
    oracle_cmd->require_subcommand(1);
    std::uint32_t m = 256, k = 256, n = 65536;
    bool both_edm = false;
    auto* birthday = oracle_cmd->add_subcommand("birthday", "port-collision probability");
    birthday->add_option("--m", m, "open ports")->required();
    birthday->add_option("--k", k, "probed ports")->required();
    birthday->add_option("--n", n, "port space");
    birthday->add_flag("--both-edm", both_edm, "both sides behind EDM NATs");
    double p = 0.11, gain = 0.64;
    auto* mix = oracle_cmd->add_subcommand("mix", "EDM population mix");
    mix->add_option("--p", p, "EDM share")->required();
    auto* improvement = oracle_cmd->add_subcommand("improvement", "aggregate improvement");
    improvement->add_option("--p", p, "EDM share")->required();
    improvement->add_option("--gain", gain, "per-class gain for mixed pairs")->required();
    double eps_ms = 0, d_ms = 0;
    auto* sync = oracle_cmd->add_subcommand("sync-safe", "synchronization safety");
    sync->add_option("--eps", eps_ms, "timing error, ms")->required();
    sync->add_option("--d", d_ms, "one-way NAT-to-NAT delay, ms")->required();

    // report
    auto* report = app.add_subcommand("report", "recompute aggregation from results");
    std::string in_path;
    std::size_t min_net = 1;
    report->add_option("--in", in_path, "results.jsonl path")->required();
    report->add_option("--min-network-samples", min_net, "per-network sample threshold");

    // presets
    auto* presets = app.add_subcommand("presets", "list bundled scenarios");
    bool show = false;
    presets->add_flag("--show", show, "print the full scenario JSON of each preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    std::cout << std::fixed << std::setprecision(precision);
    try {
        if (*birthday) {
            oracle::BirthdayParams params{m, k, n, both_edm};
            std::cout << oracle::birthday_success_prob(params) << '\n';
        } else if (*mix) {
            const auto shares = oracle::population_mix(p);
            std::cout << "eim_eim " << shares.eim_eim << "\nmixed " << shares.mixed << "\nboth "
                      << shares.edm_edm << '\n';
        } else if (*improvement) {
            std::cout << oracle::expected_improvement(oracle::population_mix(p), gain) << '\n';
        } else if (*sync) {
            oracle::SyncGeometry g{ms(eps_ms), ms(d_ms)};
            std::cout << (oracle::sync_safe(g) ? "safe" : "unsafe") << '\n';
        } else if (*run) {
            ScenarioConfig cfg;
            if (!scenario_path.empty())
                cfg = ScenarioConfig::load(scenario_path);
            else if (!preset_name.empty())
                cfg = preset(preset_name);
            else
                throw ConfigError("run needs --scenario or --preset");
            if (run->count("--seed") || std::getenv("PUNCHSIM_SEED")) cfg.seed = seed;
            if (trials) cfg.trials = trials;
            if (!transport.empty()) {
                auto f = transport_filter_from_string(transport);
                if (!f) throw ConfigError("unknown transport: " + transport);
                cfg.options.transport_filter = *f;
                cfg.transport_filter_weights = {{transport, 1.0}};
            }
            apply_enables(cfg.options, enables, birthday_mk);
            cfg.validate();

            std::filesystem::create_directories(out_dir);
            const ResultSet rs = run_campaign(cfg, jobs);
            const auto results_path = (std::filesystem::path(out_dir) / "results.jsonl").string();
            const auto csv_path = (std::filesystem::path(out_dir) / "results.csv").string();
            const auto report_path = (std::filesystem::path(out_dir) / "report.json").string();
            export_results(rs, ExportFormat::JsonLines, results_path);
            export_results(rs, ExportFormat::Csv, csv_path);
            const Report rep = aggregate(rs, cfg.min_network_samples);
            std::ofstream rf(report_path);
            if (!rf) throw IoError("cannot write " + report_path);
            rf << rep.to_json().dump(2) << '\n';
            std::cout << rep.to_json().dump(2) << '\n';
        } else if (*report) {
            const ResultSet rs = import_results(in_path);
            std::cout << aggregate(rs, min_net).to_json().dump(2) << '\n';
        } else if (*presets) {
            for (const auto& name : preset_names()) {
                std::cout << name << '\n';
                if (show) std::cout << preset(name).to_json().dump(2) << '\n';
            }
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
