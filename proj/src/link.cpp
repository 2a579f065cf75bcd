#include "punchsim/link.hpp"

#include <cmath>

namespace punchsim {

Duration sample_delay(const DelaySpec& spec, RngStream& rng) {
    switch (spec.dist) {
    case DelayDistribution::Constant:
        return spec.mean;
    case DelayDistribution::NormalTruncated: {
        if (spec.jitter_std == 0) return spec.mean;
        double v = rng.normal(static_cast<double>(spec.mean), static_cast<double>(spec.jitter_std));
        return v < 0 ? 0 : static_cast<Duration>(v);
    }
    case DelayDistribution::LogNormal: {
        if (spec.jitter_std == 0 || spec.mean == 0) return spec.mean;
        // Parameterized so the sample mean and std match the spec fields.
        double m = static_cast<double>(spec.mean);
        double s = static_cast<double>(spec.jitter_std);
        double sigma2 = std::log(1.0 + (s * s) / (m * m));
        double mu = std::log(m) - 0.5 * sigma2;
        return static_cast<Duration>(rng.lognormal(mu, std::sqrt(sigma2)));
    }
    }
    return spec.mean;
}

} // namespace punchsim
