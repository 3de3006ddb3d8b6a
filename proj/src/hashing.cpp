#include "mincil/hashing.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <stdexcept>

namespace mincil {

struct ContentHasher::Impl {
    EVP_MD_CTX* ctx = nullptr;
};

ContentHasher::ContentHasher() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 context initialization failed");
    }
}

ContentHasher::~ContentHasher() {
    EVP_MD_CTX_free(impl_->ctx);
}

ContentHasher& ContentHasher::bytes(std::span<const std::uint8_t> data) {
    EVP_DigestUpdate(impl_->ctx, data.data(), data.size());
    return *this;
}

ContentHasher& ContentHasher::text(std::string_view s) {
    u64(s.size());
    EVP_DigestUpdate(impl_->ctx, s.data(), s.size());
    return *this;
}

ContentHasher& ContentHasher::u64(std::uint64_t v) {
    std::vector<std::uint8_t> buf;
    put_u64(buf, v);
    return bytes(buf);
}

ContentHasher& ContentHasher::f64(double v) {
    std::vector<std::uint8_t> buf;
    put_f64(buf, v);
    return bytes(buf);
}

ContentHasher& ContentHasher::reals(std::span<const double> v) {
    std::vector<std::uint8_t> buf;
    buf.reserve(v.size() * 8);
    for (double x : v) {
        put_f64(buf, x);
    }
    u64(v.size());
    return bytes(buf);
}

ContentHasher& ContentHasher::matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    return reals(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

ContentHasher& ContentHasher::vector(const Vector& v) {
    return reals(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

ContentHasher& ContentHasher::ints(std::span<const int> v) {
    u64(v.size());
    for (int x : v) {
        u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(x)));
    }
    return *this;
}

std::string ContentHasher::hex_digest() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(impl_->ctx, digest, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
    return out;
}

std::string sha256_hex(std::string_view data) {
    ContentHasher h;
    h.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
    return h.hex_digest();
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

}  // namespace mincil
