#include "punchsim/oracle.hpp"

#include <cmath>

namespace punchsim::oracle {

namespace {

double log_choose(double n, double k) {
    return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

void validate(const BirthdayParams& p) {
    if (p.port_space == 0 || p.m_open < 1 || p.k_probe < 1 || p.m_open > p.port_space ||
        p.k_probe > p.port_space)
        throw InvalidParams("birthday parameters out of range");
}

} // namespace

double birthday_success_prob(const BirthdayParams& p) {
    if (p.k_probe == 0) return 0.0;
    validate(p);
    const double n = p.port_space, m = p.m_open, k = p.k_probe;
    if (p.both_edm) return m * k / (n * n);
    if (k > n - m) return 1.0;
    const double log_miss = log_choose(n - m, k) - log_choose(n, k);
    return -std::expm1(log_miss);
}

double birthday_success_prob_independent(const BirthdayParams& p) {
    if (p.k_probe == 0) return 0.0;
    validate(p);
    const double n = p.port_space, m = p.m_open, k = p.k_probe;
    if (p.both_edm) return m * k / (n * n);
    return -std::expm1(k * std::log1p(-m / n));
}

PopulationMix population_mix(double p_edm) {
    if (p_edm < 0.0 || p_edm > 1.0) throw InvalidParams("p_edm must be in [0,1]");
    PopulationMix mix;
    mix.p_edm = p_edm;
    mix.eim_eim = (1 - p_edm) * (1 - p_edm);
    mix.mixed = 2 * p_edm * (1 - p_edm);
    mix.edm_edm = p_edm * p_edm;
    return mix;
}

double expected_improvement(const PopulationMix& mix, double per_class_gain) {
    return mix.mixed * per_class_gain;
}

bool sync_safe(const SyncGeometry& g) {
    const Duration e = g.timing_error < 0 ? -g.timing_error : g.timing_error;
    return e < g.one_way_nat_to_nat;
}

} // namespace punchsim::oracle
