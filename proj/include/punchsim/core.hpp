#pragma once

#include <cstdint>
#include <compare>
#include <random>

namespace punchsim {

// Simulated time in integer microseconds. Integer time keeps event ordering
// exact and runs reproducible across platforms.
using SimTime = std::int64_t;
using Duration = std::int64_t;

constexpr Duration kMicrosecond = 1;
constexpr Duration kMillisecond = 1000;
constexpr Duration kSecond = 1000 * kMillisecond;

constexpr Duration ms(double v) { return static_cast<Duration>(v * kMillisecond); }
constexpr Duration sec(double v) { return static_cast<Duration>(v * kSecond); }

// Opaque host identifier. Internal (private) addresses and NAT external
// addresses share one id space.
using HostId = std::uint32_t;

enum class Transport : std::uint8_t { Tcp, Udp };

struct Endpoint {
    HostId address = 0;
    std::uint16_t port = 0;
    Transport transport = Transport::Udp;

    friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct EndpointHash {
    std::size_t operator()(const Endpoint& e) const {
        std::uint64_t v = (std::uint64_t(e.address) << 24) ^ (std::uint64_t(e.port) << 8) ^
                          std::uint64_t(e.transport);
        v *= 0x9e3779b97f4a7c15ull;
        return static_cast<std::size_t>(v ^ (v >> 32));
    }
};

// Deterministic seeded RNG stream. Per-trial and per-device streams are
// derived by mixing the master seed with stream labels so that trials can
// run in parallel with stable results.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static RngStream derive(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
        return RngStream(mix(mix(master, a), b));
    }

    std::uint64_t next() { return gen_(); }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_);
    }

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    double lognormal(double mu, double sigma) {
        return std::lognormal_distribution<double>(mu, sigma)(gen_);
    }

private:
    std::mt19937_64 gen_;
};

} // namespace punchsim
