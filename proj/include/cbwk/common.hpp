#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace cbwk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// =============================================================================
// Error taxonomy
// =============================================================================
// ValidationError and ConfigError map to CLI exit code 1; everything else is a
// runtime failure (exit code 2).

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// =============================================================================
// Seeding
// =============================================================================

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for a named purpose, derived from a base seed.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t purpose) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(purpose + 0x51ed27ULL)));
}

/// Uniform draw in [0, 1) with a fixed 53-bit recipe, independent of the
/// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cbwk
