#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "cogen/backends/backend.hpp"

namespace cogen {

// Assumes an OpenAI-style completions endpoint that accepts
// {prompt, max_tokens: 1, logprobs: K} and answers with
// choices[0].logprobs.top_logprobs[0] = {token: logprob, ...}.
struct ExternalHttpConfig {
  std::string base_url;                  // e.g. "http://127.0.0.1:8000"
  std::string path = "/v1/completions";
  std::string model;
  std::string api_key;                   // filled from COGEN_API_KEY when empty
  std::chrono::milliseconds timeout{10000};
  std::size_t top_k = 10;
};

struct ExternalLogits {
  TokenDistribution dist;  // sparse, at most top_k entries
  double lost_mass = 0.0;  // probability of tokens that did not map to the vocab
  bool degraded = false;   // lost_mass exceeds half of the returned mass
};

// Maps a completions response body onto `vocab`. Tokens are trimmed of
// surrounding whitespace for whitespace vocabularies; several service tokens
// mapping to one id add up.
ExternalLogits parse_completion_logprobs(std::string_view body, const Vocab& vocab, std::size_t top_k);

// Prompt text sent upstream: the instruction, then the decoded prefix.
std::string external_prompt(const Vocab& vocab, const ConditioningInput& input);

class ExternalHttpClient {
 public:
  explicit ExternalHttpClient(ExternalHttpConfig config);
  ~ExternalHttpClient();

  const ExternalHttpConfig& config() const noexcept { return config_; }
  // POSTs a JSON body and returns the response body. Serialized per client.
  std::string post_json(const std::string& body) const;

 private:
  ExternalHttpConfig config_;
  mutable std::mutex mutex_;
};

ExternalLogits external_next_logits(const ExternalHttpClient& client, const Vocab& vocab,
                                    const ConditioningInput& input, std::size_t top_k);

/// Context-blind backend backed by an external inference service.
class ExternalHttpModel final : public LanguageModel {
 public:
  using WarningSink = std::function<void(const std::string&)>;

  ExternalHttpModel(Vocab vocab, ExternalHttpConfig config, WarningSink sink = {});

  const Vocab& vocab() const override { return vocab_; }
  BackendKind kind() const override { return BackendKind::external_http; }

 protected:
  TokenDistribution do_next(const ConditioningInput& input) const override;

 private:
  Vocab vocab_;
  std::unique_ptr<ExternalHttpClient> client_;
  WarningSink sink_;
};

}  // namespace cogen
