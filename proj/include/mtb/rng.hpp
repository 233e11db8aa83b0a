#pragma once

#include <cmath>
#include <cstdint>

namespace mtb {

// Counter-based generator: every output is a pure function of (key, stream, counter),
// so independent sub-streams can be carved out of one seed and two runs with the
// same seed consume identical randomness regardless of what the caller does in
// between. Mixing is the splitmix64 finalizer applied twice, which passes the
// usual avalanche checks and is plenty for simulation noise.
class CounterRng {
public:
    CounterRng() : key_(0), counter_(0) {}
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed ^ (stream * 0x9e3779b97f4a7c15ULL))), counter_(0) {}

    std::uint64_t next_u64() { return mix(key_ + mix(++counter_)); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (cosine branch only, so each call
    /// consumes exactly two counter increments).
    double next_normal() {
        // u1 in (0, 1] to keep the log finite
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t counter() const { return counter_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

// Stream tags used by the synthetic environments. Keeping them in one place
// guarantees algorithms compared under the same seed see identical draws.
namespace rng_stream {
inline constexpr std::uint64_t kGroundTruth = 1;
inline constexpr std::uint64_t kArrival = 2;
inline constexpr std::uint64_t kContext = 3;
inline constexpr std::uint64_t kNoise = 4;
}  // namespace rng_stream

}  // namespace mtb
