#include "cogen/backends/table_model.hpp"

#include <cmath>

#include "json_util.hpp"

namespace cogen {

using detail::json;

namespace {

void check_row(const std::vector<double>& row, std::size_t vocab_size, std::string_view what) {
  if (row.size() != vocab_size) throw LoadError(std::string(what) + ": row size mismatch");
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) throw LoadError(std::string(what) + ": probability outside [0,1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > kDenseSumTolerance)
    throw LoadError(std::string(what) + ": probabilities sum to " + std::to_string(total));
}

std::vector<double> row_from_json(const json& j, const Vocab& vocab, std::string_view what) {
  if (!j.is_object()) throw LoadError(std::string(what) + ": expected {token: prob}");
  std::vector<double> row(vocab.size(), 0.0);
  for (const auto& [tok, p] : j.items()) {
    auto id = vocab.find(tok);
    if (!id) throw LoadError(std::string(what) + ": token '" + tok + "' not in vocabulary");
    row[*id] += p.get<double>();
  }
  check_row(row, vocab.size(), what);
  return row;
}

}  // namespace

TableModel::TableModel(Vocab vocab, std::vector<Rule> rules, std::vector<double> fallback, Role role)
    : LanguageModel(role), vocab_(std::move(vocab)), rules_(std::move(rules)), fallback_(std::move(fallback)) {
  check_row(fallback_, vocab_.size(), "table fallback");
  for (const auto& r : rules_) {
    check_row(r.next, vocab_.size(), "table rule");
    for (TokenId id : r.prefix)
      if (!vocab_.contains(id)) throw LoadError("table rule prefix id outside vocabulary");
  }
}

TableModel TableModel::from_path(const Vocab& vocab, const std::vector<std::string>& path, Role role) {
  std::vector<Rule> rules;
  std::vector<TokenId> prefix;
  auto one_hot = [&](TokenId id) {
    std::vector<double> row(vocab.size(), 0.0);
    row[id] = 1.0;
    return row;
  };
  for (const auto& tok : path) {
    auto id = vocab.find(tok);
    if (!id) throw InvalidInput("path token '" + tok + "' not in vocabulary");
    rules.push_back({prefix, std::nullopt, one_hot(*id)});
    prefix.push_back(*id);
  }
  rules.push_back({prefix, std::nullopt, one_hot(vocab.eos_id())});
  return TableModel(vocab, std::move(rules), one_hot(vocab.eos_id()), role);
}

TableModel TableModel::parse(std::string_view json_text, Role role) {
  json j = detail::parse_json(json_text, "table model");
  detail::require_keys(j, {"format", "vocab", "rules"}, {"version", "fallback"}, "table model");
  if (j.at("format") != "cogen-table") throw LoadError("table model: format must be 'cogen-table'");
  if (j.contains("version") && j.at("version") != 1) throw LoadError("table model: unsupported version");
  Vocab vocab = detail::vocab_from_json(j.at("vocab"));
  std::vector<Rule> rules;
  for (const auto& r : j.at("rules")) {
    detail::require_keys(r, {"prefix", "next"}, {"when"}, "table rule");
    Rule rule;
    for (const auto& tok : r.at("prefix")) {
      auto id = vocab.find(tok.get<std::string>());
      if (!id) throw LoadError("table rule: prefix token '" + tok.get<std::string>() + "' not in vocabulary");
      rule.prefix.push_back(*id);
    }
    if (r.contains("when")) rule.when = r.at("when").get<std::string>();
    rule.next = row_from_json(r.at("next"), vocab, "table rule");
    rules.push_back(std::move(rule));
  }
  std::vector<double> fallback(vocab.size(), 0.0);
  if (j.contains("fallback")) fallback = row_from_json(j.at("fallback"), vocab, "table fallback");
  else fallback[vocab.eos_id()] = 1.0;
  return TableModel(std::move(vocab), std::move(rules), std::move(fallback), role);
}

TableModel TableModel::load(const std::filesystem::path& path, Role role) {
  return parse(detail::read_file(path), role);
}

TokenDistribution TableModel::do_next(const ConditioningInput& input) const {
  const auto& prefix = input.prefix();
  const Rule* best = nullptr;
  std::string prompt;
  bool prompt_ready = false;
  for (const auto& rule : rules_) {
    if (rule.prefix.size() > prefix.size()) continue;
    if (best && rule.prefix.size() <= best->prefix.size()) continue;
    if (!std::equal(rule.prefix.begin(), rule.prefix.end(), prefix.end() - static_cast<std::ptrdiff_t>(rule.prefix.size())))
      continue;
    if (rule.when) {
      if (!prompt_ready) {
        prompt = input.prompt_text();
        prompt_ready = true;
      }
      if (prompt.find(*rule.when) == std::string::npos) continue;
    }
    best = &rule;
  }
  return TokenDistribution::dense(best ? best->next : fallback_);
}

}  // namespace cogen
