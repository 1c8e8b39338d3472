#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cogen/core/vocab.hpp"

namespace cogen {

struct TokenProb {
  TokenId id;
  double prob;

  friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

inline constexpr double kDenseSumTolerance = 1e-9;

/// Probability mass over a vocabulary of known size.
///
/// Dense form stores one probability per id and always sums to 1 within
/// kDenseSumTolerance. Sparse form stores unique (id, prob) entries sorted by
/// descending probability with ties broken by lower id; its mass may be below
/// one (a truncated view) but never above 1 + kDenseSumTolerance.
class TokenDistribution {
 public:
  static TokenDistribution dense(std::vector<double> probs);
  static TokenDistribution sparse(std::size_t vocab_size, std::vector<TokenProb> entries);
  static TokenDistribution one_hot(std::size_t vocab_size, TokenId id);
  static TokenDistribution uniform(std::size_t vocab_size);

  bool is_dense() const noexcept { return dense_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  double mass() const noexcept { return mass_; }

  double prob(TokenId id) const noexcept;
  // Dense form only.
  std::span<const double> probs() const;
  // Sparse form only.
  std::span<const TokenProb> entries() const;

  // Zero-filled dense vector (not validated as a distribution).
  std::vector<double> to_vector() const;
  // (id, prob) list for every nonzero entry in canonical sparse order.
  std::vector<TokenProb> ranked() const;
  // Highest-probability id; ties go to the lower id.
  TokenId argmax() const;
  double max_prob() const noexcept;

  friend bool operator==(const TokenDistribution& a, const TokenDistribution& b) {
    return a.dense_ == b.dense_ && a.vocab_size_ == b.vocab_size_ && a.probs_ == b.probs_ &&
           a.entries_ == b.entries_;
  }

 private:
  TokenDistribution() = default;

  bool dense_ = true;
  std::size_t vocab_size_ = 0;
  double mass_ = 0.0;
  std::vector<double> probs_;
  std::vector<TokenProb> entries_;
};

// Orders entries by descending probability, lower id first on ties.
void sort_ranked(std::vector<TokenProb>& entries);

std::vector<double> softmax_values(std::span<const double> logits);
TokenDistribution softmax(std::span<const double> logits);

std::vector<double> apply_temperature(std::span<const double> logits, double temperature);

// Keeps the k most probable entries (ties by lower id) without renormalizing.
TokenDistribution top_k_project(const TokenDistribution& dist, std::size_t k);

// Sparse distribution rescaled to unit mass, returned in dense form.
TokenDistribution renormalized(const TokenDistribution& dist);

// The k largest probabilities in descending order, zero padded to length k.
std::vector<double> top_probs(const TokenDistribution& dist, std::size_t k);

}  // namespace cogen
