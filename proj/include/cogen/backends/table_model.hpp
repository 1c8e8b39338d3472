#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cogen/backends/backend.hpp"

namespace cogen {

/// Deterministic rule table. A rule fires when its prefix equals the trailing
/// tokens of r_<k and, if set, its `when` text occurs in the prompt. Among
/// firing rules the longest prefix wins, then the earliest declared.
class TableModel final : public LanguageModel {
 public:
  struct Rule {
    std::vector<TokenId> prefix;
    std::optional<std::string> when;
    std::vector<double> next;  // dense, normalized
  };

  TableModel(Vocab vocab, std::vector<Rule> rules, std::vector<double> fallback, Role role);

  // Emits `path` token by token, then EOS. Rules match trailing tokens, so a
  // prefix that leaves the path continues from its longest matching suffix.
  static TableModel from_path(const Vocab& vocab, const std::vector<std::string>& path, Role role);

  static TableModel parse(std::string_view json_text, Role role);
  static TableModel load(const std::filesystem::path& path, Role role);

  const Vocab& vocab() const override { return vocab_; }
  BackendKind kind() const override { return BackendKind::table; }
  const std::vector<Rule>& rules() const noexcept { return rules_; }

 protected:
  TokenDistribution do_next(const ConditioningInput& input) const override;

 private:
  Vocab vocab_;
  std::vector<Rule> rules_;
  std::vector<double> fallback_;
};

}  // namespace cogen
