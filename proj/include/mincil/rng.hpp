#pragma once

#include "mincil/matrix.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace mincil {

/// Explicitly owned random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the C++ standard.
/// Distributions are implemented here rather than taken from <random> because
/// the standard leaves their algorithms to the library vendor. Normals use the
/// Box-Muller transform (both outputs consumed, one cached), uniform integers
/// use rejection sampling on the raw 64-bit output.
///
/// Not shareable between threads; split with `derive()` instead.
class SeededRng {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64+box-muller";

    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    /// Number of raw 64-bit words consumed so far.
    std::uint64_t cursor() const noexcept { return cursor_; }
    /// Rebuild the exact stream position from (seed, cursor, cached normal).
    static SeededRng restore(std::uint64_t seed, std::uint64_t cursor, bool has_spare, double spare);
    bool has_spare() const noexcept { return has_spare_; }
    double spare() const noexcept { return spare_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform();
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);
    double normal();

    /// Independent child stream keyed by `salt`; does not advance this stream.
    SeededRng derive(std::uint64_t salt) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::uint64_t cursor_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// i.i.d. N(0,1) matrix filled row by row.
Matrix sample_standard_normal(SeededRng& rng, Eigen::Index rows, Eigen::Index cols);

/// SplitMix64 finalizer, used to combine seeds with salts.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace mincil
