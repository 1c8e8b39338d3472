#include "cogen/backends/external_http.hpp"

#include <cmath>
#include <cstdlib>
#include <map>

#include <httplib.h>

#include "json_util.hpp"

namespace cogen {

using detail::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

ExternalLogits parse_completion_logprobs(std::string_view body, const Vocab& vocab, std::size_t top_k) {
  if (top_k < 1) throw InvalidConfig("top-k must be at least 1");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("completions response is not JSON: ") + e.what());
  }
  const json* top = nullptr;
  try {
    const auto& lp = j.at("choices").at(0).at("logprobs");
    top = &lp.at("top_logprobs").at(0);
  } catch (const json::exception&) {
    throw ProtocolError("completions response lacks choices[0].logprobs.top_logprobs[0]");
  }
  if (!top->is_object()) throw ProtocolError("top_logprobs[0] must be an object");

  // Service order first: highest log-probabilities, ties by token text.
  std::vector<std::pair<std::string, double>> raw;
  for (const auto& [tok, lp] : top->items()) {
    if (!lp.is_number()) throw ProtocolError("log-probability for '" + tok + "' is not a number");
    raw.emplace_back(tok, lp.get<double>());
  }
  std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (raw.size() > top_k) raw.resize(top_k);

  std::map<TokenId, double> mapped;
  double returned = 0.0, lost = 0.0;
  for (const auto& [tok, lp] : raw) {
    const double p = std::exp(lp);
    returned += p;
    const std::string key = vocab.policy() == TokenizerPolicy::whitespace ? trim(tok) : tok;
    auto id = vocab.find(key);
    if (!id || *id == vocab.unk_id()) {
      lost += p;
      continue;
    }
    mapped[*id] += p;
  }
  std::vector<TokenProb> entries;
  for (const auto& [id, p] : mapped) entries.push_back({id, std::min(p, 1.0)});
  ExternalLogits out{TokenDistribution::sparse(vocab.size(), std::move(entries)), lost, false};
  out.degraded = returned > 0.0 && lost > 0.5 * returned;
  return out;
}

std::string external_prompt(const Vocab& vocab, const ConditioningInput& input) {
  std::string prompt = input.instruction();
  if (!input.prefix().empty()) {
    prompt += '\n';
    prompt += vocab.decode(input.prefix());
  }
  return prompt;
}

ExternalHttpClient::ExternalHttpClient(ExternalHttpConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw InvalidConfig("external service base URL is empty");
  if (config_.api_key.empty())
    if (const char* key = std::getenv("COGEN_API_KEY")) config_.api_key = key;
}

ExternalHttpClient::~ExternalHttpClient() = default;

std::string ExternalHttpClient::post_json(const std::string& body) const {
  std::lock_guard lock(mutex_);
  httplib::Client cli(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(config_.path, headers, body, "application/json");
  if (!res)
    throw TransportError("external service " + config_.base_url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    const bool retryable = res->status == 429 || res->status >= 500;
    throw TransportError("external service " + config_.base_url + " answered HTTP " + std::to_string(res->status),
                         retryable);
  }
  return res->body;
}

ExternalLogits external_next_logits(const ExternalHttpClient& client, const Vocab& vocab,
                                    const ConditioningInput& input, std::size_t top_k) {
  if (input.context()) throw PrivacyViolation("context must not be sent to an external service");
  json request = {{"prompt", external_prompt(vocab, input)},
                  {"max_tokens", 1},
                  {"logprobs", top_k},
                  {"temperature", 0}};
  if (!client.config().model.empty()) request["model"] = client.config().model;
  return parse_completion_logprobs(client.post_json(request.dump()), vocab, top_k);
}

ExternalHttpModel::ExternalHttpModel(Vocab vocab, ExternalHttpConfig config, WarningSink sink)
    : LanguageModel(Role::large_cloud),
      vocab_(std::move(vocab)),
      client_(std::make_unique<ExternalHttpClient>(std::move(config))),
      sink_(std::move(sink)) {}

TokenDistribution ExternalHttpModel::do_next(const ConditioningInput& input) const {
  ExternalLogits out = external_next_logits(*client_, vocab_, input, client_->config().top_k);
  if (out.degraded && sink_)
    sink_("external service: vocabulary mapping lost " + std::to_string(out.lost_mass) +
          " probability mass at prefix length " + std::to_string(input.prefix().size()));
  return std::move(out.dist);
}

}  // namespace cogen
