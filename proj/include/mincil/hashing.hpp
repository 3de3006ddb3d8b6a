#pragma once

#include "mincil/matrix.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mincil {

/// Incremental SHA-256 producing lowercase hex. Matrices are fed as their
/// shape followed by little-endian IEEE-754 doubles in row-major order.
class ContentHasher {
public:
    ContentHasher();
    ~ContentHasher();
    ContentHasher(const ContentHasher&) = delete;
    ContentHasher& operator=(const ContentHasher&) = delete;

    ContentHasher& bytes(std::span<const std::uint8_t> data);
    ContentHasher& text(std::string_view s);
    ContentHasher& u64(std::uint64_t v);
    ContentHasher& f64(double v);
    ContentHasher& matrix(const Matrix& m);
    ContentHasher& vector(const Vector& v);
    ContentHasher& reals(std::span<const double> v);
    ContentHasher& ints(std::span<const int> v);

    std::string hex_digest();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view data);

/// Appends the little-endian encoding of v to out.
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

}  // namespace mincil
