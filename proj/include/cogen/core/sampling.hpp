#pragma once

#include <cstdint>

#include "cogen/core/distribution.hpp"
#include "cogen/core/rng.hpp"

namespace cogen {

/// Decoding defaults: temperature 0.7, nucleus 0.9, at most 1024 new tokens.
struct SamplingConfig {
  double temperature = 0.7;
  double top_p = 0.9;
  std::uint32_t max_new_tokens = 1024;
  std::uint64_t seed = 0;
  // Argmax decoding with lowest-id tie break; ignores temperature and top_p.
  bool greedy = false;

  void validate() const;

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

// p_i^(1/T) renormalized, computed in log space; zero entries stay zero.
TokenDistribution temper(const TokenDistribution& dist, double temperature);

// Temperature first, then the nucleus: sort by descending probability (lower
// id first on ties), keep the shortest prefix with cumulative mass >= top_p,
// renormalize, draw one token with `rng`.
TokenId sample_top_p(const TokenDistribution& dist, const SamplingConfig& config, Rng& rng);

}  // namespace cogen
