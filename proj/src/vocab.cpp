#include "cogen/core/vocab.hpp"

#include <cstdio>

#include "cogen/error.hpp"

namespace cogen {

std::string_view to_string(TokenizerPolicy policy) noexcept {
  return policy == TokenizerPolicy::whitespace ? "whitespace" : "character";
}

TokenizerPolicy parse_tokenizer_policy(std::string_view text) {
  if (text == "whitespace") return TokenizerPolicy::whitespace;
  if (text == "character") return TokenizerPolicy::character;
  throw InvalidConfig("unknown tokenizer policy '" + std::string(text) + "'");
}

namespace {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length of the UTF-8 sequence starting with `lead`, or 1 for invalid bytes.
std::size_t utf8_width(unsigned char lead) noexcept {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

std::size_t scalar_width(std::string_view s, std::size_t pos) noexcept {
  std::size_t w = utf8_width(static_cast<unsigned char>(s[pos]));
  if (pos + w > s.size()) return 1;
  for (std::size_t i = 1; i < w; ++i) {
    if ((static_cast<unsigned char>(s[pos + i]) >> 6) != 0x2) return 1;
  }
  return w;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text, TokenizerPolicy policy) {
  std::vector<std::string> out;
  if (policy == TokenizerPolicy::whitespace) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      std::size_t start = i;
      while (i < text.size() && !is_space(text[i])) ++i;
      if (i > start) out.emplace_back(text.substr(start, i - start));
    }
  } else {
    for (std::size_t i = 0; i < text.size();) {
      std::size_t w = scalar_width(text, i);
      out.emplace_back(text.substr(i, w));
      i += w;
    }
  }
  return out;
}

std::size_t count_scalars(std::string_view utf8) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < utf8.size(); i += scalar_width(utf8, i)) ++n;
  return n;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(std::string_view text) {
  if (text.size() != 16) throw InvalidInput("expected 16 hex digits, got '" + std::string(text) + "'");
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw InvalidInput("invalid hex digit in '" + std::string(text) + "'");
  }
  return v;
}

Vocab::Vocab(std::vector<std::string> tokens, TokenId eos_id, TokenId unk_id,
             TokenizerPolicy policy)
    : tokens_(std::move(tokens)), eos_id_(eos_id), unk_id_(unk_id), policy_(policy) {
  if (tokens_.size() < 2) throw InvalidInput("vocabulary needs at least 2 tokens");
  if (eos_id_ >= tokens_.size() || unk_id_ >= tokens_.size())
    throw InvalidInput("eos/unk id outside vocabulary");
  if (eos_id_ == unk_id_) throw InvalidInput("eos and unk must be distinct");
  index_.reserve(tokens_.size());
  std::string material(to_string(policy_));
  material += '\0';
  material += std::to_string(eos_id_) + ':' + std::to_string(unk_id_);
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    if (!index_.emplace(tokens_[id], id).second)
      throw InvalidInput("duplicate token '" + tokens_[id] + "' in vocabulary");
    material += '\0';
    material += tokens_[id];
  }
  hash_ = fnv1a64(material);
}

Vocab Vocab::build(const std::vector<std::string>& texts, TokenizerPolicy policy) {
  std::vector<std::string> tokens{std::string(kEosToken), std::string(kUnkToken)};
  std::unordered_map<std::string, bool> seen{{tokens[0], true}, {tokens[1], true}};
  for (const auto& text : texts) {
    for (auto& tok : split_tokens(text, policy)) {
      if (seen.emplace(tok, true).second) tokens.push_back(std::move(tok));
    }
  }
  return Vocab(std::move(tokens), 0, 1, policy);
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw InvalidInput("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[id];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id_or_unk(std::string_view token) const {
  return find(token).value_or(unk_id_);
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& tok : split_tokens(text, policy_)) ids.push_back(id_or_unk(tok));
  return ids;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == eos_id_) continue;
    if (policy_ == TokenizerPolicy::whitespace && !out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace cogen
