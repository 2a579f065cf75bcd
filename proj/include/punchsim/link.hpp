#pragma once

#include "punchsim/core.hpp"

namespace punchsim {

enum class DelayDistribution : std::uint8_t { Constant, NormalTruncated, LogNormal };

struct DelaySpec {
    Duration mean = 0;
    Duration jitter_std = 0;
    DelayDistribution dist = DelayDistribution::Constant;
};

enum class LinkDirection : std::uint8_t { Forward, Backward };

// Per-direction one-way delay, loss and hop count between two attachment
// points (host-to-NAT segment or core path).
struct LinkModel {
    DelaySpec forward;
    DelaySpec backward;
    double loss_prob = 0.0;
    int forward_hops = 1;
    int backward_hops = 1;

    static LinkModel constant(Duration one_way, int hops = 1) {
        LinkModel l;
        l.forward = {one_way, 0, DelayDistribution::Constant};
        l.backward = {one_way, 0, DelayDistribution::Constant};
        l.forward_hops = hops;
        l.backward_hops = hops;
        return l;
    }

    const DelaySpec& spec(LinkDirection d) const {
        return d == LinkDirection::Forward ? forward : backward;
    }
    int hops(LinkDirection d) const {
        return d == LinkDirection::Forward ? forward_hops : backward_hops;
    }
};

Duration sample_delay(const DelaySpec& spec, RngStream& rng);

inline Duration sample_delay(const LinkModel& link, LinkDirection dir, RngStream& rng) {
    return sample_delay(link.spec(dir), rng);
}

} // namespace punchsim
