#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/core/distribution.hpp"
#include "cogen/core/sampling.hpp"

namespace cogen {

/// Frames are a 4-byte big-endian length followed by that many bytes of
/// canonical JSON (sorted keys, no whitespace). Doubles travel as the 16 hex
/// digits of their IEEE-754 bit pattern so both ends see identical values.
inline constexpr int kWireVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

enum class WireKind { hello, logits, generate, error };

std::string_view to_string(WireKind kind) noexcept;

// The only request shape the service accepts: an instruction and token ids.
// There is no field that could carry profile or history text.
struct WireRequest {
  WireKind kind = WireKind::logits;
  std::string session;
  std::string instruction;             // logits, generate
  std::vector<TokenId> prefix_ids;     // logits
  std::uint32_t top_k = 10;            // logits
  SamplingConfig sampling;             // generate

  friend bool operator==(const WireRequest&, const WireRequest&) = default;
};

struct WireResponse {
  WireKind kind = WireKind::logits;
  std::uint64_t vocab_hash = 0;        // hello, logits, generate
  std::uint64_t vocab_size = 0;        // hello
  std::vector<TokenProb> entries;      // logits: top-k probabilities, ranked
  std::vector<TokenId> tokens;         // generate
  std::string message;                 // error

  friend bool operator==(const WireResponse&, const WireResponse&) = default;
};

std::string encode_request(const WireRequest& request);
std::string encode_response(const WireResponse& response);
// Strict: unknown or missing fields, a wrong version or a bad type raise
// ProtocolError.
WireRequest decode_request(std::string_view body);
WireResponse decode_response(std::string_view body);

std::string frame(std::string_view body);
// Reads the length prefix; throws ProtocolError above kMaxFrameBytes.
std::uint32_t frame_length(std::string_view header4);

}  // namespace cogen
