#pragma once

#include <cmath>
#include <cstdint>

namespace fbdual {

// Counter-based Gaussian stream. normal(seed, path, step, dim) is a pure
// function of its arguments, so path simulation is order-free: serial and
// parallel runs produce bit-identical draws.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t dim) {
    std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
    h = splitmix64(h ^ (path * 0xff51afd7ed558ccdULL));
    h = splitmix64(h ^ (step * 0xc4ceb9fe1a85ec53ULL));
    h = splitmix64(h ^ (dim * 0x9e3779b97f4a7c15ULL));
    return h;
}

// Uniform in the open interval (0, 1).
inline double to_unit(std::uint64_t u) {
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two decorrelated counter values.
inline double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t dim) {
    const std::uint64_t a = mix(seed, path, step, 2 * dim);
    const std::uint64_t b = mix(seed, path, step, 2 * dim + 1);
    const double u1 = to_unit(a);
    const double u2 = to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace rng
} // namespace fbdual
