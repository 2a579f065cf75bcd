#pragma once

#include <cstdint>
#include <stdexcept>

#include "punchsim/core.hpp"

namespace punchsim::oracle {

struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct BirthdayParams {
    std::uint32_t m_open = 256;
    std::uint32_t k_probe = 256;
    std::uint32_t port_space = 65536;
    bool both_edm = false;
};

// Probability that k probes sampled without replacement from N ports hit any
// of m open ports: 1 - C(N-m, k)/C(N, k), computed in log space. both_edm
// switches to the product approximation m*k/N^2.
double birthday_success_prob(const BirthdayParams& p);

// Independent-sampling approximation 1 - (1 - m/N)^k; agrees with the exact
// form to four decimals at the usual parameters.
double birthday_success_prob_independent(const BirthdayParams& p);

struct PopulationMix {
    double p_edm = 0.0;
    double eim_eim = 1.0;
    double mixed = 0.0;
    double edm_edm = 0.0;
};

PopulationMix population_mix(double p_edm);

// Aggregate success-rate improvement in probability points when the mixed
// EDM/EIM class is rescued at per_class_gain.
double expected_improvement(const PopulationMix& mix, double per_class_gain);

struct SyncGeometry {
    Duration timing_error = 0;       // signed
    Duration one_way_nat_to_nat = 0; // d >= 0
};

// Safe iff |timing_error| < d: each first packet leaves its NAT before the
// counterpart's first packet arrives. Equality counts as unsafe.
bool sync_safe(const SyncGeometry& g);

} // namespace punchsim::oracle
