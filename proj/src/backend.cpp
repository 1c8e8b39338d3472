#include "cogen/backends/backend.hpp"

#include "cogen/backends/external_http.hpp"
#include "cogen/backends/ngram_model.hpp"
#include "cogen/backends/table_model.hpp"
#include "cogen/error.hpp"

namespace cogen {

std::string_view to_string(Role role) noexcept {
  return role == Role::large_cloud ? "large_cloud" : "small_device";
}

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::table: return "table";
    case BackendKind::ngram: return "ngram";
    case BackendKind::remote: return "remote";
    case BackendKind::external_http: return "external_http";
  }
  return "unknown";
}

Role parse_role(std::string_view text) {
  if (text == "large_cloud") return Role::large_cloud;
  if (text == "small_device") return Role::small_device;
  throw InvalidConfig("unknown backend role '" + std::string(text) + "'");
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "table") return BackendKind::table;
  if (text == "ngram") return BackendKind::ngram;
  if (text == "remote") return BackendKind::remote;
  if (text == "external_http") return BackendKind::external_http;
  throw InvalidConfig("unknown backend kind '" + std::string(text) + "'");
}

bool ContextBundle::empty() const noexcept {
  if (!profile.empty()) return false;
  for (const auto& h : history)
    if (!h.empty()) return false;
  return true;
}

std::string ContextBundle::joined() const {
  std::string out = profile;
  for (const auto& h : history) {
    if (!out.empty()) out += '\n';
    out += h;
  }
  return out;
}

ConditioningInput ConditioningInput::for_role(Role role, std::string instruction,
                                              std::optional<ContextBundle> context,
                                              std::vector<TokenId> prefix) {
  if (role == Role::large_cloud && context.has_value())
    throw PrivacyViolation("context must not be sent to a large_cloud backend");
  ConditioningInput in;
  in.role_ = role;
  in.instruction_ = std::move(instruction);
  in.context_ = std::move(context);
  in.prefix_ = std::move(prefix);
  return in;
}

ConditioningInput ConditioningInput::with_prefix(std::vector<TokenId> prefix) const {
  ConditioningInput in = *this;
  in.prefix_ = std::move(prefix);
  return in;
}

std::string ConditioningInput::prompt_text() const {
  std::string out = instruction_;
  if (context_) {
    out += '\n';
    out += context_->joined();
  }
  return out;
}

TokenDistribution LanguageModel::next_distribution(const ConditioningInput& input) const {
  if (role_ == Role::large_cloud && input.context().has_value())
    throw PrivacyViolation("large_cloud backend received a context-bearing request");
  const auto& v = vocab();
  for (TokenId id : input.prefix())
    if (!v.contains(id)) throw InvalidInput("prefix token id " + std::to_string(id) + " outside vocabulary");
  return do_next(input);
}

std::shared_ptr<const LanguageModel> load_backend(const BackendDescriptor& d) {
  std::shared_ptr<const LanguageModel> model;
  switch (d.kind) {
    case BackendKind::table:
      model = std::make_shared<TableModel>(TableModel::load(d.params_uri, d.role));
      break;
    case BackendKind::ngram:
      model = std::make_shared<NGramModel>(NGramModel::load(d.params_uri, d.role));
      break;
    case BackendKind::external_http:
      throw InvalidConfig("external_http backends need a vocabulary; construct ExternalHttpModel directly");
    case BackendKind::remote:
      throw InvalidConfig("remote backends are reached through the logit service client");
  }
  if (!d.vocab_ref.empty() && hex64(model->vocab().hash()) != d.vocab_ref)
    throw IncompatibleVocab("backend '" + d.params_uri + "' vocabulary hash " + hex64(model->vocab().hash()) +
                            " does not match expected " + d.vocab_ref);
  return model;
}

}  // namespace cogen
