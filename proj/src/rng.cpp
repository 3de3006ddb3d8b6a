#include "mincil/rng.hpp"

#include "mincil/errors.hpp"

#include <cmath>
#include <numbers>

namespace mincil {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

SeededRng SeededRng::restore(std::uint64_t seed, std::uint64_t cursor, bool has_spare, double spare) {
    SeededRng rng(seed);
    rng.engine_.discard(cursor);
    rng.cursor_ = cursor;
    rng.has_spare_ = has_spare;
    rng.spare_ = spare;
    return rng;
}

std::uint64_t SeededRng::next_u64() {
    ++cursor_;
    return engine_();
}

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
    if (n == 0) {
        throw ValidationError("uniform_index: empty range");
    }
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

SeededRng SeededRng::derive(std::uint64_t salt) const {
    return SeededRng(mix_seed(seed_, salt));
}

Matrix sample_standard_normal(SeededRng& rng, Eigen::Index rows, Eigen::Index cols) {
    if (rows < 1 || cols < 1) {
        throw ValidationError("sample_standard_normal: size must be at least 1x1");
    }
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = rng.normal();
        }
    }
    return out;
}

}  // namespace mincil
