#include "vawi/rng.hpp"

#include <algorithm>
#include <cmath>

namespace vawi {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += kGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t absorb(std::uint64_t state, std::uint64_t v) {
    state ^= v * kGamma + 0x632BE59BD9B4E019ull;
    splitmix64(state);
    return state;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, StreamKey key) {
    std::uint64_t s = seed;
    s = absorb(s, 0x56415749ull); // stream family tag
    s = absorb(s, key.epoch);
    s = absorb(s, key.batch);
    s = absorb(s, key.purpose);
    state_ = s;
}

std::uint64_t RngStream::next_u64() {
    return splitmix64(state_);
}

double RngStream::uniform_open01() {
    // 53 mantissa bits, offset by half an ulp so 0 and 1 are unreachable.
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
}

double RngStream::gaussian(double mean, double stddev) {
    if (has_cached_gaussian_) {
        has_cached_gaussian_ = false;
        return mean + stddev * cached_gaussian_;
    }
    const double u1 = uniform_open01();
    const double u2 = uniform_open01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_gaussian_ = r * std::sin(theta);
    has_cached_gaussian_ = true;
    return mean + stddev * r * std::cos(theta);
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t limit = bound * (0xFFFFFFFFFFFFFFFFull / bound);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
}

double gumbel_from_uniform(double u) {
    const double clamped = std::clamp(u, 1e-12, 1.0 - 1e-12);
    return -std::log(-std::log(clamped));
}

} // namespace vawi
