#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace ettwin {

/// SplitMix64 finalizer. All seeds in the project are derived through it.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed from a parent seed and a path of integer tags.
/// derive_seed(s, {a, b}) == derive_seed(derive_seed(s, {a}), {b}).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = parent;
    for (auto tag : path) s = splitmix64(s ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    return s;
}

/// Maps 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential SplitMix64 stream.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    constexpr double uniform() noexcept { return to_unit(next()); }
    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

/// Counter-based standard normal: value depends only on (seed, index).
inline double counter_normal(std::uint64_t seed, std::uint64_t index) noexcept {
    const double u1 = 1.0 - to_unit(splitmix64(seed ^ splitmix64(2 * index)));
    const double u2 = to_unit(splitmix64(seed ^ splitmix64(2 * index + 1)));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ettwin
