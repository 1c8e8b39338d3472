#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cogen/core/distribution.hpp"

namespace cogen {

/// How p_s and p_l are combined into p_c.
struct FusionStrategy {
  enum class Kind { fixed, mean, max, learnable };

  Kind kind = Kind::mean;
  double weight = 0.5;     // fixed only, in [0, 1]
  std::string model_ref;   // learnable only: where the CombModel came from

  static FusionStrategy fixed(double w);
  static FusionStrategy mean() { return {Kind::mean, 0.5, {}}; }
  static FusionStrategy max() { return {Kind::max, 0.5, {}}; }
  static FusionStrategy learnable(std::string model_ref = "inline") { return {Kind::learnable, 0.5, std::move(model_ref)}; }

  void validate() const;
  std::string describe() const;
};

/// Both operands laid out over the union of their supports.
struct AlignedPair {
  std::size_t vocab_size = 0;
  std::vector<TokenId> support;  // ascending
  std::vector<double> p_s;
  std::vector<double> p_l;
  // True when both inputs were dense; the weighted sum is then used as is.
  bool dense = false;
};

AlignedPair align_supports(const TokenDistribution& p_s, const TokenDistribution& p_l);

struct FusionResult {
  TokenDistribution dist;
  double w_used;
};

// Weighted rules: p_c = w * p_s + (1 - w) * p_l, renormalized over the support
// unless both inputs were dense. Max rule: elementwise max, renormalized; its
// w_used is the share of that mass taken from the SLM side (ties split evenly).
// Learnable strategies must pass the CombModel output as w_override.
FusionResult fuse(const AlignedPair& pair, const FusionStrategy& strategy,
                  std::optional<double> w_override = std::nullopt);

}  // namespace cogen
