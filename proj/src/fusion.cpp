#include "cogen/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cogen/error.hpp"

namespace cogen {

FusionStrategy FusionStrategy::fixed(double w) {
  FusionStrategy s{Kind::fixed, w, {}};
  s.validate();
  return s;
}

void FusionStrategy::validate() const {
  if (kind == Kind::fixed && !(weight >= 0.0 && weight <= 1.0))
    throw InvalidConfig("fixed fusion weight must lie in [0, 1], got " + std::to_string(weight));
  if (kind == Kind::learnable && model_ref.empty())
    throw InvalidConfig("learnable fusion needs a CombModel reference");
}

std::string FusionStrategy::describe() const {
  switch (kind) {
    case Kind::fixed: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "fixed(%.17g)", weight);
      return buf;
    }
    case Kind::mean: return "mean";
    case Kind::max: return "max";
    case Kind::learnable: return "learnable(" + model_ref + ")";
  }
  return "unknown";
}

AlignedPair align_supports(const TokenDistribution& p_s, const TokenDistribution& p_l) {
  if (p_s.vocab_size() != p_l.vocab_size())
    throw IncompatibleVocab("fusion operands cover vocabularies of size " + std::to_string(p_s.vocab_size()) +
                            " and " + std::to_string(p_l.vocab_size()));
  AlignedPair pair;
  pair.vocab_size = p_s.vocab_size();
  pair.dense = p_s.is_dense() && p_l.is_dense();
  if (p_s.is_dense() || p_l.is_dense()) {
    pair.support.resize(pair.vocab_size);
    for (TokenId i = 0; i < pair.vocab_size; ++i) pair.support[i] = i;
    pair.p_s = p_s.to_vector();
    pair.p_l = p_l.to_vector();
    return pair;
  }
  for (const auto& e : p_s.entries()) pair.support.push_back(e.id);
  for (const auto& e : p_l.entries()) pair.support.push_back(e.id);
  std::sort(pair.support.begin(), pair.support.end());
  pair.support.erase(std::unique(pair.support.begin(), pair.support.end()), pair.support.end());
  pair.p_s.reserve(pair.support.size());
  pair.p_l.reserve(pair.support.size());
  for (TokenId id : pair.support) {
    pair.p_s.push_back(p_s.prob(id));
    pair.p_l.push_back(p_l.prob(id));
  }
  return pair;
}

namespace {

TokenDistribution package(const AlignedPair& pair, std::vector<double> values, bool normalize) {
  if (normalize) {
    double total = 0.0;
    for (double v : values) total += v;
    if (!(total > 0.0)) throw InvalidDistribution("fused distribution has no mass on its support");
    for (double& v : values) v /= total;
  }
  if (pair.support.size() == pair.vocab_size) return TokenDistribution::dense(std::move(values));
  std::vector<TokenProb> entries;
  entries.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) entries.push_back({pair.support[i], values[i]});
  return TokenDistribution::sparse(pair.vocab_size, std::move(entries));
}

}  // namespace

FusionResult fuse(const AlignedPair& pair, const FusionStrategy& strategy, std::optional<double> w_override) {
  if (pair.support.empty()) throw InvalidInput("fusion over an empty support");
  strategy.validate();
  const std::size_t n = pair.support.size();

  if (strategy.kind == FusionStrategy::Kind::max) {
    std::vector<double> values(n);
    double slm_share = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = pair.p_s[i], b = pair.p_l[i];
      values[i] = std::max(a, b);
      total += values[i];
      if (a > b) slm_share += a;
      else if (a == b) slm_share += 0.5 * a;
    }
    const double w = total > 0.0 ? slm_share / total : 0.5;
    return {package(pair, std::move(values), true), w};
  }

  double w = 0.5;
  switch (strategy.kind) {
    case FusionStrategy::Kind::fixed: w = w_override.value_or(strategy.weight); break;
    case FusionStrategy::Kind::mean: w = 0.5; break;
    case FusionStrategy::Kind::learnable:
      if (!w_override) throw InvalidConfig("learnable fusion requires the CombModel weight");
      w = *w_override;
      break;
    case FusionStrategy::Kind::max: break;
  }
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidConfig("fusion weight " + std::to_string(w) + " outside [0, 1]");
  std::vector<double> values(n);
  const double v = 1.0 - w;
  for (std::size_t i = 0; i < n; ++i) values[i] = w * pair.p_s[i] + v * pair.p_l[i];
  return {package(pair, std::move(values), !pair.dense), w};
}

}  // namespace cogen
