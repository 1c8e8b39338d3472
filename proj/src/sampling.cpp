#include "cogen/core/sampling.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cogen/error.hpp"

namespace cogen {

void SamplingConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidConfig("temperature must be positive, got " + std::to_string(temperature));
  if (!(top_p > 0.0 && top_p <= 1.0))
    throw InvalidConfig("top_p must lie in (0, 1], got " + std::to_string(top_p));
  if (max_new_tokens == 0) throw InvalidConfig("max_new_tokens must be positive");
}

TokenDistribution temper(const TokenDistribution& dist, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidConfig("temperature must be positive, got " + std::to_string(temperature));
  std::vector<double> p = dist.to_vector();
  if (temperature == 1.0 && dist.is_dense()) return dist;
  double max_log = -std::numeric_limits<double>::infinity();
  for (double x : p)
    if (x > 0.0) max_log = std::max(max_log, std::log(x));
  if (!std::isfinite(max_log)) throw InvalidDistribution("distribution has no mass");
  double total = 0.0;
  for (double& x : p) {
    x = x > 0.0 ? std::exp((std::log(x) - max_log) / temperature) : 0.0;
    total += x;
  }
  for (double& x : p) x /= total;
  return TokenDistribution::dense(std::move(p));
}

TokenId sample_top_p(const TokenDistribution& dist, const SamplingConfig& config, Rng& rng) {
  if (std::fabs(dist.mass() - 1.0) > kDenseSumTolerance)
    throw InvalidDistribution("cannot sample from distribution with mass " + std::to_string(dist.mass()));
  if (config.greedy) return dist.argmax();
  config.validate();

  const TokenDistribution tempered = temper(dist, config.temperature);
  std::vector<TokenProb> ranked = tempered.ranked();
  if (ranked.empty()) throw InvalidDistribution("distribution has no mass");

  std::size_t keep = ranked.size();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    cumulative += ranked[i].prob;
    if (cumulative >= config.top_p) {
      keep = i + 1;
      break;
    }
  }
  ranked.resize(keep);
  double nucleus_mass = 0.0;
  for (const auto& e : ranked) nucleus_mass += e.prob;

  const double u = rng.next_double() * nucleus_mass;
  double acc = 0.0;
  for (const auto& e : ranked) {
    acc += e.prob;
    if (u < acc) return e.id;
  }
  return ranked.back().id;
}

}  // namespace cogen
