#pragma once

#include <cstdint>

namespace vawi {

// Identifies one logical random stream. Streams keyed by (seed, epoch, batch,
// purpose) draw identical sequences regardless of how work is scheduled, so
// training stays bit-reproducible even if evaluation is sharded.
struct StreamKey {
    std::uint64_t epoch = 0;
    std::uint64_t batch = 0;
    std::uint64_t purpose = 0;
};

// Well-known purpose tags. Keeping them in one place avoids accidental
// collisions between modules drawing from the same (seed, epoch, batch).
namespace purpose {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t gumbel = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t subsample = 5;
inline constexpr std::uint64_t data_gen = 6;
} // namespace purpose

// Counter-based generator (splitmix64 core). Distribution code is hand-rolled
// so draw sequences do not depend on any standard-library implementation.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, StreamKey key = {});

    std::uint64_t next_u64();

    // Uniform on the open interval (0, 1); never returns an exact endpoint.
    double uniform_open01();

    // Box-Muller normal draw; the paired value is cached for the next call.
    double gaussian(double mean = 0.0, double stddev = 1.0);

    // Uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t uniform_below(std::uint64_t bound);

private:
    std::uint64_t state_;
    double cached_gaussian_ = 0.0;
    bool has_cached_gaussian_ = false;
};

// Standard Gumbel(0,1) value from a uniform draw. u is clamped into
// [1e-12, 1 - 1e-12] so the double log never produces an infinity.
double gumbel_from_uniform(double u);

} // namespace vawi
