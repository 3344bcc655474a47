#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace residual {

// Philox4x32-10 counter-based generator. The whole simulation draws through
// this: key = run seed, counter = (path, step, purpose/block), so any word of
// noise is a pure function of those coordinates and results cannot depend on
// the thread schedule.
namespace philox {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace philox

enum class DrawPurpose : std::uint32_t {
  kNoise = 0,    // dynamics noise xi_{n+1}
  kInitial = 1,  // initial-condition sampling
  kGeneric = 2,  // estimator-local Monte Carlo
};

struct CounterRng {
  std::uint64_t seed = 0;

  std::array<std::uint32_t, 4> raw(std::uint64_t path, std::uint32_t step, DrawPurpose purpose,
                                   std::uint32_t block_index) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), step,
        (static_cast<std::uint32_t>(purpose) << 28) | (block_index & 0x0FFFFFFFu)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                              static_cast<std::uint32_t>(seed >> 32)};
    return philox::block(ctr, key);
  }

  // Two uniforms in (0,1), 53-bit resolution, never exactly 0 or 1.
  std::array<double, 2> uniform_pair(std::uint64_t path, std::uint32_t step, DrawPurpose purpose,
                                     std::uint32_t block_index) const {
    const auto w = raw(path, step, purpose, block_index);
    const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return {(static_cast<double>(a >> 11) + 0.5) * scale,
            (static_cast<double>(b >> 11) + 0.5) * scale};
  }

  // Box-Muller transform of one counter block: two independent N(0,1) draws.
  std::array<double, 2> normal_pair(std::uint64_t path, std::uint32_t step, DrawPurpose purpose,
                                    std::uint32_t block_index) const {
    const auto u = uniform_pair(path, step, purpose, block_index);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double theta = 6.283185307179586476925286766559 * u[1];
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  // First Box-Muller coordinate only; the d == 1 hot path skips the sin().
  double normal_single(std::uint64_t path, std::uint32_t step, DrawPurpose purpose,
                       std::uint32_t block_index) const {
    const auto u = uniform_pair(path, step, purpose, block_index);
    return std::sqrt(-2.0 * std::log(u[0])) *
           std::cos(6.283185307179586476925286766559 * u[1]);
  }

  double uniform_single(std::uint64_t path, std::uint32_t step, DrawPurpose purpose,
                        std::uint32_t block_index) const {
    return uniform_pair(path, step, purpose, block_index)[0];
  }
};

}  // namespace residual
