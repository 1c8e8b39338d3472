#include "cogen/decoder/cloud_model.hpp"

#include "cogen/error.hpp"
#include "cogen/service/service.hpp"
#include "cogen/service/wire.hpp"

namespace cogen {

void RequestLog::append(std::string payload) {
  std::lock_guard lock(mu_);
  payloads_.push_back(std::move(payload));
}

std::vector<std::string> RequestLog::payloads() const {
  std::lock_guard lock(mu_);
  return payloads_;
}

std::size_t RequestLog::size() const {
  std::lock_guard lock(mu_);
  return payloads_.size();
}

void RequestLog::clear() {
  std::lock_guard lock(mu_);
  payloads_.clear();
}

LocalCloudModel::LocalCloudModel(std::shared_ptr<const LanguageModel> backend, std::string session)
    : backend_(std::move(backend)), session_(std::move(session)) {
  if (!backend_) throw InvalidConfig("LocalCloudModel needs a backend");
  if (backend_->role() != Role::large_cloud) throw InvalidConfig("LocalCloudModel needs a large_cloud backend");
}

std::uint64_t LocalCloudModel::vocab_hash() const { return backend_->vocab().hash(); }
std::size_t LocalCloudModel::vocab_size() const { return backend_->vocab().size(); }

namespace {

WireResponse expect(WireResponse response, WireKind kind, std::uint64_t vocab_hash) {
  if (response.kind == WireKind::error) throw ProtocolError("cloud backend error: " + response.message);
  if (response.kind != kind) throw ProtocolError("unexpected response kind " + std::string(to_string(response.kind)));
  if (response.vocab_hash != vocab_hash) throw IncompatibleVocab("cloud response carries a different vocab hash");
  return response;
}

}  // namespace

TokenDistribution LocalCloudModel::next_logits(const std::string& instruction, const std::vector<TokenId>& prefix,
                                               std::size_t top_k) {
  WireRequest request{WireKind::logits, session_, instruction, prefix, static_cast<std::uint32_t>(top_k), {}};
  auto payload = encode_request(request);
  record(payload);
  auto response = expect(handle_request(*backend_, decode_request(payload)), WireKind::logits, vocab_hash());
  return TokenDistribution::sparse(vocab_size(), std::move(response.entries));
}

std::vector<TokenId> LocalCloudModel::generate(const std::string& instruction, const SamplingConfig& sampling) {
  WireRequest request{WireKind::generate, session_, instruction, {}, 0, sampling};
  auto payload = encode_request(request);
  record(payload);
  return expect(handle_request(*backend_, decode_request(payload)), WireKind::generate, vocab_hash()).tokens;
}

}  // namespace cogen
