#include "cogen/service/wire.hpp"

#include <bit>
#include <limits>

#include "cogen/error.hpp"
#include "json_util.hpp"

namespace cogen {

using detail::json;

std::string_view to_string(WireKind kind) noexcept {
  switch (kind) {
    case WireKind::hello: return "hello";
    case WireKind::logits: return "logits";
    case WireKind::generate: return "generate";
    case WireKind::error: return "error";
  }
  return "error";
}

namespace {

WireKind parse_kind(const json& j) {
  if (!j.is_string()) throw ProtocolError("field 'kind' must be a string");
  auto s = j.get<std::string>();
  if (s == "hello") return WireKind::hello;
  if (s == "logits") return WireKind::logits;
  if (s == "generate") return WireKind::generate;
  if (s == "error") return WireKind::error;
  throw ProtocolError("unknown message kind '" + s + "'");
}

json parse_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed frame: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("frame body must be a JSON object");
  if (!j.contains("version") || !j.contains("kind")) throw ProtocolError("frame lacks 'version' or 'kind'");
  if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kWireVersion)
    throw ProtocolError("unsupported protocol version " + j.at("version").dump());
  return j;
}

std::uint64_t hex_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a hex string");
  try {
    return parse_hex64(v.get<std::string>());
  } catch (const Error&) {
    throw ProtocolError(std::string("field '") + key + "' is not 16 hex digits");
  }
}

double double_field(const json& j, const char* key) { return std::bit_cast<double>(hex_field(j, key)); }

template <class T>
T unsigned_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ProtocolError(std::string("field '") + key + "' must be a non-negative integer");
  auto raw = v.get<std::uint64_t>();
  if (raw > std::numeric_limits<T>::max()) throw ProtocolError(std::string("field '") + key + "' is out of range");
  return static_cast<T>(raw);
}

std::string string_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<TokenId> ids_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ProtocolError(std::string("field '") + key + "' must be an array");
  std::vector<TokenId> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number_unsigned() || x.get<std::uint64_t>() > std::numeric_limits<TokenId>::max())
      throw ProtocolError(std::string("field '") + key + "' holds a non-token value");
    out.push_back(x.get<TokenId>());
  }
  return out;
}

}  // namespace

std::string encode_request(const WireRequest& r) {
  json j{{"version", kWireVersion}, {"kind", std::string(to_string(r.kind))}, {"session", r.session}};
  switch (r.kind) {
    case WireKind::hello: break;
    case WireKind::logits:
      j["instruction"] = r.instruction;
      j["prefix_ids"] = r.prefix_ids;
      j["top_k"] = r.top_k;
      break;
    case WireKind::generate:
      j["instruction"] = r.instruction;
      j["sampling"] = json{{"temperature", detail::double_bits(r.sampling.temperature)},
                           {"top_p", detail::double_bits(r.sampling.top_p)},
                           {"max_new_tokens", r.sampling.max_new_tokens},
                           {"seed", hex64(r.sampling.seed)},
                           {"greedy", r.sampling.greedy}};
      break;
    case WireKind::error: throw ProtocolError("error is not a request kind");
  }
  return j.dump();
}

WireRequest decode_request(std::string_view body) {
  auto j = parse_body(body);
  WireRequest r;
  r.kind = parse_kind(j.at("kind"));
  switch (r.kind) {
    case WireKind::hello:
      detail::require_keys<ProtocolError>(j, {"version", "kind", "session"}, {}, "hello request");
      break;
    case WireKind::logits:
      detail::require_keys<ProtocolError>(j, {"version", "kind", "session", "instruction", "prefix_ids", "top_k"}, {},
                                          "logits request");
      r.instruction = string_field(j, "instruction");
      r.prefix_ids = ids_field(j, "prefix_ids");
      r.top_k = unsigned_field<std::uint32_t>(j, "top_k");
      break;
    case WireKind::generate: {
      detail::require_keys<ProtocolError>(j, {"version", "kind", "session", "instruction", "sampling"}, {},
                                          "generate request");
      r.instruction = string_field(j, "instruction");
      const auto& s = j.at("sampling");
      detail::require_keys<ProtocolError>(s, {"temperature", "top_p", "max_new_tokens", "seed", "greedy"}, {},
                                          "sampling");
      r.sampling.temperature = double_field(s, "temperature");
      r.sampling.top_p = double_field(s, "top_p");
      r.sampling.max_new_tokens = unsigned_field<std::uint32_t>(s, "max_new_tokens");
      r.sampling.seed = hex_field(s, "seed");
      if (!s.at("greedy").is_boolean()) throw ProtocolError("field 'greedy' must be a boolean");
      r.sampling.greedy = s.at("greedy").get<bool>();
      break;
    }
    case WireKind::error: throw ProtocolError("error is not a request kind");
  }
  r.session = string_field(j, "session");
  return r;
}

std::string encode_response(const WireResponse& r) {
  json j{{"version", kWireVersion}, {"kind", std::string(to_string(r.kind))}};
  switch (r.kind) {
    case WireKind::hello:
      j["vocab_hash"] = hex64(r.vocab_hash);
      j["vocab_size"] = r.vocab_size;
      break;
    case WireKind::logits: {
      j["vocab_hash"] = hex64(r.vocab_hash);
      json entries = json::array();
      for (const auto& e : r.entries) entries.push_back(json::array({e.id, detail::double_bits(e.prob)}));
      j["entries"] = std::move(entries);
      break;
    }
    case WireKind::generate:
      j["vocab_hash"] = hex64(r.vocab_hash);
      j["tokens"] = r.tokens;
      break;
    case WireKind::error: j["message"] = r.message; break;
  }
  return j.dump();
}

WireResponse decode_response(std::string_view body) {
  auto j = parse_body(body);
  WireResponse r;
  r.kind = parse_kind(j.at("kind"));
  switch (r.kind) {
    case WireKind::hello:
      detail::require_keys<ProtocolError>(j, {"version", "kind", "vocab_hash", "vocab_size"}, {}, "hello response");
      r.vocab_hash = hex_field(j, "vocab_hash");
      r.vocab_size = unsigned_field<std::uint64_t>(j, "vocab_size");
      break;
    case WireKind::logits: {
      detail::require_keys<ProtocolError>(j, {"version", "kind", "vocab_hash", "entries"}, {}, "logits response");
      r.vocab_hash = hex_field(j, "vocab_hash");
      const auto& entries = j.at("entries");
      if (!entries.is_array()) throw ProtocolError("field 'entries' must be an array");
      for (const auto& e : entries) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_string())
          throw ProtocolError("logits entry must be [id, \"hex\"]");
        auto id = e[0].get<std::uint64_t>();
        if (id > std::numeric_limits<TokenId>::max()) throw ProtocolError("token id out of range");
        std::uint64_t bits;
        try {
          bits = parse_hex64(e[1].get<std::string>());
        } catch (const Error&) {
          throw ProtocolError("logits entry probability is not 16 hex digits");
        }
        r.entries.push_back({static_cast<TokenId>(id), std::bit_cast<double>(bits)});
      }
      break;
    }
    case WireKind::generate:
      detail::require_keys<ProtocolError>(j, {"version", "kind", "vocab_hash", "tokens"}, {}, "generate response");
      r.vocab_hash = hex_field(j, "vocab_hash");
      r.tokens = ids_field(j, "tokens");
      break;
    case WireKind::error:
      detail::require_keys<ProtocolError>(j, {"version", "kind", "message"}, {}, "error response");
      r.message = string_field(j, "message");
      break;
  }
  return r;
}

std::string frame(std::string_view body) {
  if (body.size() > kMaxFrameBytes) throw ProtocolError("frame body exceeds the size limit");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out += static_cast<char>((n >> 24) & 0xff);
  out += static_cast<char>((n >> 16) & 0xff);
  out += static_cast<char>((n >> 8) & 0xff);
  out += static_cast<char>(n & 0xff);
  out.append(body);
  return out;
}

std::uint32_t frame_length(std::string_view header4) {
  if (header4.size() != 4) throw ProtocolError("frame header must be 4 bytes");
  std::uint32_t n = 0;
  for (char c : header4) n = (n << 8) | static_cast<unsigned char>(c);
  if (n > kMaxFrameBytes) throw ProtocolError("frame of " + std::to_string(n) + " bytes exceeds the size limit");
  return n;
}

}  // namespace cogen
