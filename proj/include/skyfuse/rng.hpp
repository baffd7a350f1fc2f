#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace skyfuse {

/// SplitMix64 generator. Small, fast, and fully specified, so every stage of
/// a run is reproducible from its seed alone on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_f(float lo, float hi) {
        return static_cast<float>(uniform(lo, hi));
    }

    /// Unbiased integer in [0, n) via 128-bit multiply.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.141592653589793 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// FNV-1a hash of a tag string; used only for seed derivation.
constexpr std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Derives an independent stream seed from a root seed and a stage tag.
/// Every stage of a pipeline run draws from `derive_seed(root, "stage")`,
/// so stages can be re-run in isolation with identical randomness.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    Rng mix(root ^ tag_hash(tag));
    return mix.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t index) {
    Rng mix(root ^ tag_hash(tag) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return mix.next_u64();
}

}  // namespace skyfuse
