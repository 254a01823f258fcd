#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace zonecast {

/// Deterministic random source used everywhere seeds matter.
///
/// Standard-library distributions are implementation-defined, so every draw
/// here is spelled out explicitly: the same seed yields the same stream on
/// any platform. Generator is xoshiro256++ seeded through splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    /// Independent substream for a named parallel task (fold index, zone
    /// index, ...). Streams derived from distinct ids do not overlap in
    /// practice: the child is re-seeded through splitmix64.
    Rng derive(std::uint64_t stream_id) const {
        return Rng(state_[0] ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection-free multiply-shift would bias
    /// slightly; n here is always far below 2^32 so 64-bit modulo bias is
    /// below 2^-32 and irrelevant for data generation, but we still use
    /// Lemire's method for exactness.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller. Both values of the pair are used.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Multiplicative log-normal noise with unit mean: exp(sigma*N - sigma^2/2).
    double lognormal_unit_mean(double sigma) {
        if (sigma <= 0.0) return 1.0;
        return std::exp(sigma * normal() - 0.5 * sigma * sigma);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// FNV-1a 64-bit hash; used for config hashes and output checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_str(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace zonecast
