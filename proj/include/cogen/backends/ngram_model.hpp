#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cogen/backends/backend.hpp"

namespace cogen {

/// Add-alpha smoothed n-gram model.
///
///   p(y | h) = (c(h, y) + alpha) / (c(h) + alpha * |V|)
///
/// h is the last n-1 tokens of the prefix, left padded with EOS. Training
/// texts are padded the same way and closed with EOS.
///
/// With context_weight > 0 and a context present, the result is mixed with a
/// cache model estimated from the context tokens:
///
///   p = (1 - lambda) * p_ngram + lambda * p_cache
///   p_cache(y | prev) = (c_C(prev, y) + beta * u(y)) / (c_C(prev) + beta)
///   u(y) = (c_C(y) + alpha) / (N_C + alpha * |V|)
///
/// This is how a desk-scale backend conditions on private context at query
/// time. Without context the cache term is absent.
class NGramModel final : public LanguageModel {
 public:
  struct Options {
    unsigned order = 2;
    double alpha = 1.0;
    double context_weight = 0.0;
    double context_concentration = 2.0;
  };

  using History = std::vector<TokenId>;
  using Row = std::map<TokenId, std::uint32_t>;
  using Counts = std::map<History, Row>;

  static NGramModel train(const std::vector<std::string>& corpus, const Options& options,
                          TokenizerPolicy policy, Role role = Role::small_device);
  static NGramModel train(const std::vector<std::string>& corpus, const Options& options,
                          const Vocab& vocab, Role role = Role::small_device);

  static NGramModel parse(std::string_view json_text, Role role);
  static NGramModel load(const std::filesystem::path& path, Role role);
  // Deterministic bytes: same corpus and options give the same string.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  NGramModel with_role(Role role) const;
  NGramModel with_context_weight(double weight, double concentration = 2.0) const;

  const Vocab& vocab() const override { return data_->vocab; }
  BackendKind kind() const override { return BackendKind::ngram; }
  const Options& options() const noexcept { return data_->options; }
  const Counts& counts() const noexcept { return data_->counts; }

  std::uint32_t count(std::span<const TokenId> history, TokenId next) const;
  // Smoothed conditional distribution for an explicit (n-1)-token history.
  std::vector<double> conditional(std::span<const TokenId> history) const;

 protected:
  TokenDistribution do_next(const ConditioningInput& input) const override;

 private:
  struct Data {
    Vocab vocab;
    Options options;
    Counts counts;
    std::map<History, std::uint64_t> totals;
  };
  struct ContextStats;
  struct ContextCache;

  NGramModel(std::shared_ptr<const Data> data, Role role);
  std::shared_ptr<const ContextStats> context_stats(const ContextBundle& context) const;

  std::shared_ptr<const Data> data_;
  std::shared_ptr<ContextCache> cache_;
};

}  // namespace cogen
