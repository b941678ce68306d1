#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace couplex {

/// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// A pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Fixed stream identifiers so the different consumers of one seed never
/// overlap.
namespace streams {
inline constexpr std::uint32_t forward = 1;
inline constexpr std::uint32_t coupled = 2;
inline constexpr std::uint32_t reference = 3;
inline constexpr std::uint32_t bsde = 4;
inline constexpr std::uint32_t control = 5;
inline constexpr std::uint32_t pairs = 6;
inline constexpr std::uint32_t bootstrap = 7;
inline constexpr std::uint32_t control_eval = 8;
}  // namespace streams

/// Counter-based stream addressed by (seed, experiment, path). Each draw is
/// further addressed by step and block, so the value of any normal is
/// independent of how paths are distributed over workers.
///
/// Counter layout: {step, path, experiment, block}; key: the 64-bit seed.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint32_t experiment, std::uint32_t path) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          experiment_(experiment),
          path_(path) {}

    /// Raw 128-bit block.
    std::array<std::uint32_t, 4> block(std::uint32_t step, std::uint32_t index) const noexcept {
        return philox4x32({step, path_, experiment_, index}, key_);
    }

    /// Fills `out` with independent N(0,1) draws for the given step
    /// (Box–Muller, two normals per block).
    void normals(std::uint32_t step, std::span<double> out) const noexcept;

    /// Uniform on the open interval (0, 1); two per block.
    void uniforms(std::uint32_t step, std::span<double> out) const noexcept;

    std::uint32_t path() const noexcept { return path_; }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t experiment_;
    std::uint32_t path_;
};

}  // namespace couplex
