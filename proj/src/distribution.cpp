#include "cogen/core/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cogen/error.hpp"

namespace cogen {

namespace {

double neumaier_sum(std::span<const double> xs) noexcept {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

void check_prob(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    throw InvalidDistribution("probability " + std::to_string(p) + " outside [0,1]");
}

}  // namespace

void sort_ranked(std::vector<TokenProb>& entries) {
  std::sort(entries.begin(), entries.end(), [](const TokenProb& a, const TokenProb& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.id < b.id;
  });
}

TokenDistribution TokenDistribution::dense(std::vector<double> probs) {
  if (probs.empty()) throw InvalidDistribution("empty distribution");
  for (double p : probs) check_prob(p);
  const double total = neumaier_sum(probs);
  if (std::fabs(total - 1.0) > kDenseSumTolerance)
    throw InvalidDistribution("dense distribution sums to " + std::to_string(total));
  TokenDistribution d;
  d.dense_ = true;
  d.vocab_size_ = probs.size();
  d.mass_ = total;
  d.probs_ = std::move(probs);
  return d;
}

TokenDistribution TokenDistribution::sparse(std::size_t vocab_size, std::vector<TokenProb> entries) {
  if (vocab_size == 0) throw InvalidDistribution("empty vocabulary");
  std::vector<bool> seen(vocab_size, false);
  std::vector<double> values;
  values.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.id >= vocab_size)
      throw InvalidInput("token id " + std::to_string(e.id) + " outside vocabulary");
    if (seen[e.id]) throw InvalidDistribution("duplicate token id " + std::to_string(e.id));
    seen[e.id] = true;
    check_prob(e.prob);
    values.push_back(e.prob);
  }
  const double total = neumaier_sum(values);
  if (total > 1.0 + kDenseSumTolerance)
    throw InvalidDistribution("sparse mass " + std::to_string(total) + " exceeds 1");
  sort_ranked(entries);
  TokenDistribution d;
  d.dense_ = false;
  d.vocab_size_ = vocab_size;
  d.mass_ = total;
  d.entries_ = std::move(entries);
  return d;
}

TokenDistribution TokenDistribution::one_hot(std::size_t vocab_size, TokenId id) {
  if (id >= vocab_size) throw InvalidInput("token id outside vocabulary");
  std::vector<double> p(vocab_size, 0.0);
  p[id] = 1.0;
  return dense(std::move(p));
}

TokenDistribution TokenDistribution::uniform(std::size_t vocab_size) {
  if (vocab_size == 0) throw InvalidDistribution("empty vocabulary");
  return dense(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)));
}

double TokenDistribution::prob(TokenId id) const noexcept {
  if (dense_) return id < probs_.size() ? probs_[id] : 0.0;
  for (const auto& e : entries_)
    if (e.id == id) return e.prob;
  return 0.0;
}

std::span<const double> TokenDistribution::probs() const {
  if (!dense_) throw InvalidDistribution("dense view requested from sparse distribution");
  return probs_;
}

std::span<const TokenProb> TokenDistribution::entries() const {
  if (dense_) throw InvalidDistribution("sparse view requested from dense distribution");
  return entries_;
}

std::vector<double> TokenDistribution::to_vector() const {
  if (dense_) return probs_;
  std::vector<double> out(vocab_size_, 0.0);
  for (const auto& e : entries_) out[e.id] = e.prob;
  return out;
}

std::vector<TokenProb> TokenDistribution::ranked() const {
  if (!dense_) {
    std::vector<TokenProb> out;
    for (const auto& e : entries_)
      if (e.prob > 0.0) out.push_back(e);
    return out;
  }
  std::vector<TokenProb> out;
  out.reserve(probs_.size());
  for (TokenId i = 0; i < probs_.size(); ++i)
    if (probs_[i] > 0.0) out.push_back({i, probs_[i]});
  sort_ranked(out);
  return out;
}

TokenId TokenDistribution::argmax() const {
  if (dense_) {
    TokenId best = 0;
    for (TokenId i = 1; i < probs_.size(); ++i)
      if (probs_[i] > probs_[best]) best = i;
    return best;
  }
  if (entries_.empty()) throw InvalidDistribution("argmax of empty sparse distribution");
  return entries_.front().id;
}

double TokenDistribution::max_prob() const noexcept {
  if (dense_) return probs_.empty() ? 0.0 : *std::max_element(probs_.begin(), probs_.end());
  return entries_.empty() ? 0.0 : entries_.front().prob;
}

std::vector<double> softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax of empty logits");
  double max_logit = logits[0];
  for (double x : logits) {
    if (!std::isfinite(x)) throw InvalidInput("non-finite logit");
    max_logit = std::max(max_logit, x);
  }
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - max_logit);
  const double total = neumaier_sum(out);
  for (double& p : out) p /= total;
  return out;
}

TokenDistribution softmax(std::span<const double> logits) {
  return TokenDistribution::dense(softmax_values(logits));
}

std::vector<double> apply_temperature(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidConfig("temperature must be positive, got " + std::to_string(temperature));
  std::vector<double> out(logits.begin(), logits.end());
  if (temperature != 1.0)
    for (double& x : out) x /= temperature;
  return out;
}

TokenDistribution top_k_project(const TokenDistribution& dist, std::size_t k) {
  if (k < 1) throw InvalidConfig("top-k must be at least 1");
  std::vector<TokenProb> ranked;
  if (dist.is_dense()) {
    auto p = dist.probs();
    ranked.reserve(p.size());
    for (TokenId i = 0; i < p.size(); ++i) ranked.push_back({i, p[i]});
    if (k < ranked.size()) {
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                        [](const TokenProb& a, const TokenProb& b) {
                          if (a.prob != b.prob) return a.prob > b.prob;
                          return a.id < b.id;
                        });
      ranked.resize(k);
    } else {
      sort_ranked(ranked);
    }
  } else {
    auto e = dist.entries();
    ranked.assign(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(std::min(k, e.size())));
  }
  return TokenDistribution::sparse(dist.vocab_size(), std::move(ranked));
}

TokenDistribution renormalized(const TokenDistribution& dist) {
  if (dist.is_dense()) return dist;
  if (!(dist.mass() > 0.0)) throw InvalidDistribution("cannot renormalize zero-mass distribution");
  std::vector<double> p(dist.vocab_size(), 0.0);
  for (const auto& e : dist.entries()) p[e.id] = e.prob / dist.mass();
  return TokenDistribution::dense(std::move(p));
}

std::vector<double> top_probs(const TokenDistribution& dist, std::size_t k) {
  std::vector<double> out(k, 0.0);
  if (dist.is_dense()) {
    auto p = dist.probs();
    std::vector<double> sorted(p.begin(), p.end());
    const std::size_t n = std::min(k, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n), sorted.end(),
                      std::greater<>());
    std::copy_n(sorted.begin(), n, out.begin());
  } else {
    auto e = dist.entries();
    for (std::size_t i = 0; i < std::min(k, e.size()); ++i) out[i] = e[i].prob;
  }
  return out;
}

}  // namespace cogen
