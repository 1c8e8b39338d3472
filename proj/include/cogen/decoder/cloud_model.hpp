#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cogen/backends/backend.hpp"
#include "cogen/core/sampling.hpp"

namespace cogen {

/// Every request body that left the device, in order. Shared between a
/// CloudModel and whoever audits it.
class RequestLog {
 public:
  void append(std::string payload);
  std::vector<std::string> payloads() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<std::string> payloads_;
};

/// The context-blind large model as the decoder sees it. Its interface only
/// admits an instruction and token ids.
class CloudModel {
 public:
  virtual ~CloudModel() = default;

  virtual std::uint64_t vocab_hash() const = 0;
  virtual std::size_t vocab_size() const = 0;

  // Top-k next-token probabilities as a sparse distribution.
  virtual TokenDistribution next_logits(const std::string& instruction, const std::vector<TokenId>& prefix,
                                        std::size_t top_k) = 0;
  // Whole-sequence decoding on the cloud side (used for sketches).
  virtual std::vector<TokenId> generate(const std::string& instruction, const SamplingConfig& sampling) = 0;

  void set_request_log(std::shared_ptr<RequestLog> log) { log_ = std::move(log); }
  const std::shared_ptr<RequestLog>& request_log() const noexcept { return log_; }

 protected:
  void record(const std::string& payload) const {
    if (log_) log_->append(payload);
  }

 private:
  std::shared_ptr<RequestLog> log_;
};

/// In-process placement: the same request handler the service runs, called
/// directly. Payloads are still encoded so the log matches the wire.
class LocalCloudModel final : public CloudModel {
 public:
  explicit LocalCloudModel(std::shared_ptr<const LanguageModel> backend, std::string session = "local");

  std::uint64_t vocab_hash() const override;
  std::size_t vocab_size() const override;
  TokenDistribution next_logits(const std::string& instruction, const std::vector<TokenId>& prefix,
                                std::size_t top_k) override;
  std::vector<TokenId> generate(const std::string& instruction, const SamplingConfig& sampling) override;

  const LanguageModel& backend() const noexcept { return *backend_; }

 private:
  std::shared_ptr<const LanguageModel> backend_;
  std::string session_;
};

}  // namespace cogen
