#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based generation (Philox 4x32-10). Every draw is a pure function of
// (seed, trial, level, purpose, counter, index), so parallel Monte Carlo is
// schedule-independent and dyadic path refinements are reproducible.

namespace logsde::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMul0, ctr[0], lo0, hi0);
    mulhilo(kMul1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

// Purpose tags keep unrelated consumers of the same (seed, trial) on
// independent substreams.
enum class Purpose : std::uint32_t {
  brownian_increment = 1,
  bridge_midpoint = 2,
  modulus_pairs = 3,
  control_sample = 4,
  optimizer_restart = 5,
};

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t trial, std::uint32_t level, Purpose purpose) {
    std::uint64_t h = splitmix64(seed ^ 0x6c62272e07bb0142ull);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(level) << 32 |
                        static_cast<std::uint64_t>(purpose)));
    key_ = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  }

  std::array<std::uint32_t, 4> words(std::uint64_t counter, std::uint32_t block) const {
    return detail::philox4x32_10({static_cast<std::uint32_t>(counter),
                                  static_cast<std::uint32_t>(counter >> 32), block, 0u},
                                 key_);
  }

  // Uniform on (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform01(std::uint64_t counter, std::uint32_t block) const {
    const auto w = words(counter, block);
    const std::uint64_t u = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller pair from one Philox block.
  void normal_pair(std::uint64_t counter, std::uint32_t block, double& z0, double& z1) const {
    const auto w = words(counter, block);
    const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    z0 = r * std::cos(th);
    z1 = r * std::sin(th);
  }

  // idx-th standard normal at a given counter.
  double normal(std::uint64_t counter, std::uint32_t idx) const {
    double z0, z1;
    normal_pair(counter, idx >> 1, z0, z1);
    return (idx & 1u) ? z1 : z0;
  }

 private:
  std::array<std::uint32_t, 2> key_;
};

}  // namespace logsde::rng
