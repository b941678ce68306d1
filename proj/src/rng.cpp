#include "couplex/rng.hpp"

#include <cmath>
#include <numbers>

namespace couplex {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

// 53-bit uniform in (0, 1) from two 32-bit words.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMulA, ctr[0], lo0, hi0);
        mulhilo(kMulB, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

void RngStream::normals(std::uint32_t step, std::span<double> out) const noexcept {
    const std::size_t n = out.size();
    for (std::size_t i = 0, blk = 0; i < n; i += 2, ++blk) {
        const auto w = block(step, static_cast<std::uint32_t>(blk));
        const double u1 = to_open_unit(w[0], w[1]);
        const double u2 = to_open_unit(w[2], w[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(angle);
        if (i + 1 < n) out[i + 1] = r * std::sin(angle);
    }
}

void RngStream::uniforms(std::uint32_t step, std::span<double> out) const noexcept {
    const std::size_t n = out.size();
    for (std::size_t i = 0, blk = 0; i < n; i += 2, ++blk) {
        const auto w = block(step, static_cast<std::uint32_t>(blk));
        out[i] = to_open_unit(w[0], w[1]);
        if (i + 1 < n) out[i + 1] = to_open_unit(w[2], w[3]);
    }
}

}  // namespace couplex
