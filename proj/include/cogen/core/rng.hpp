#pragma once

#include <cstdint>

namespace cogen {

/// xoshiro256** seeded through splitmix64.
///
/// The state is four 64-bit words filled by successive splitmix64 outputs
/// starting from `seed`. next_double() takes the top 53 bits of next_u64()
/// and scales by 2^-53, so it lies in [0, 1). docs/rng.md lists the first
/// outputs for reference seeds; any port must reproduce them exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  double next_double() noexcept;
  // Uniform integer in [0, bound); bound must be > 0. Lemire's
  // multiply-shift with rejection, so results are unbiased.
  std::uint64_t next_below(std::uint64_t bound) noexcept;

  static std::uint64_t splitmix64(std::uint64_t& state) noexcept;

 private:
  std::uint64_t s_[4];
};

}  // namespace cogen
