#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/core/distribution.hpp"
#include "cogen/core/vocab.hpp"

namespace cogen {

enum class Role { large_cloud, small_device };
enum class BackendKind { table, ngram, remote, external_http };

std::string_view to_string(Role role) noexcept;
std::string_view to_string(BackendKind kind) noexcept;
Role parse_role(std::string_view text);
BackendKind parse_backend_kind(std::string_view text);

/// Private user context C: profile text plus prior writings / activity logs.
struct ContextBundle {
  std::string profile;
  std::vector<std::string> history;

  bool empty() const noexcept;
  // Profile then history items, newline separated.
  std::string joined() const;
};

/// What a backend sees when asked for the next token: instruction t,
/// optional context C and the generated prefix r_<k.
///
/// Construction enforces the privacy boundary: an input addressed to a
/// large_cloud backend can never hold context.
class ConditioningInput {
 public:
  static ConditioningInput for_role(Role role, std::string instruction,
                                    std::optional<ContextBundle> context,
                                    std::vector<TokenId> prefix = {});
  static ConditioningInput context_blind(std::string instruction, std::vector<TokenId> prefix = {}) {
    return for_role(Role::large_cloud, std::move(instruction), std::nullopt, std::move(prefix));
  }

  Role role() const noexcept { return role_; }
  const std::string& instruction() const noexcept { return instruction_; }
  const std::optional<ContextBundle>& context() const noexcept { return context_; }
  const std::vector<TokenId>& prefix() const noexcept { return prefix_; }

  ConditioningInput with_prefix(std::vector<TokenId> prefix) const;
  // Instruction followed by the joined context, used by rule predicates.
  std::string prompt_text() const;

 private:
  ConditioningInput() = default;

  Role role_ = Role::large_cloud;
  std::string instruction_;
  std::optional<ContextBundle> context_;
  std::vector<TokenId> prefix_;
};

/// A next-token model. Implementations are immutable after construction and
/// may be queried concurrently.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocab& vocab() const = 0;
  virtual BackendKind kind() const = 0;
  Role role() const noexcept { return role_; }

  // Checks the privacy contract and prefix ids, then delegates to do_next().
  TokenDistribution next_distribution(const ConditioningInput& input) const;

 protected:
  explicit LanguageModel(Role role) : role_(role) {}
  virtual TokenDistribution do_next(const ConditioningInput& input) const = 0;

 private:
  Role role_;
};

struct BackendDescriptor {
  BackendKind kind = BackendKind::ngram;
  Role role = Role::small_device;
  // Expected Vocab::hash() in hex; empty means "whatever the model carries".
  std::string vocab_ref;
  // Model file for table/ngram, host:port for remote, base URL for external_http.
  std::string params_uri;
};

// Loads table and ngram backends. Remote backends are reached
// through RemoteCloudModel instead.
std::shared_ptr<const LanguageModel> load_backend(const BackendDescriptor& descriptor);

}  // namespace cogen
