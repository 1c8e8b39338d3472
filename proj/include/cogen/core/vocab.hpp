#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cogen {

using TokenId = std::uint32_t;

enum class TokenizerPolicy { whitespace, character };

std::string_view to_string(TokenizerPolicy policy) noexcept;
TokenizerPolicy parse_tokenizer_policy(std::string_view text);

// Splits text into surface tokens. Whitespace policy splits on ASCII
// whitespace; character policy yields one token per Unicode scalar value.
std::vector<std::string> split_tokens(std::string_view text, TokenizerPolicy policy);

// Number of Unicode scalar values in a UTF-8 string. Invalid bytes count as
// one scalar each.
std::size_t count_scalars(std::string_view utf8) noexcept;

inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

/// Shared token inventory. Both backends of a fused session must hold a Vocab
/// with the same hash().
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, TokenId eos_id, TokenId unk_id,
        TokenizerPolicy policy = TokenizerPolicy::whitespace);

  // Specials first ("</s>" = 0, "<unk>" = 1), then tokens in first-appearance
  // order over `texts`.
  static Vocab build(const std::vector<std::string>& texts, TokenizerPolicy policy);

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId eos_id() const noexcept { return eos_id_; }
  TokenId unk_id() const noexcept { return unk_id_; }
  TokenizerPolicy policy() const noexcept { return policy_; }

  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;
  bool contains(TokenId id) const noexcept { return id < tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<TokenId> encode(std::string_view text) const;
  // EOS is dropped; other ids render as their surface strings.
  std::string decode(const std::vector<TokenId>& ids) const;

  // FNV-1a over policy, specials, and every token (NUL separated).
  std::uint64_t hash() const noexcept { return hash_; }

  friend bool operator==(const Vocab& a, const Vocab& b) noexcept {
    return a.hash_ == b.hash_ && a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId eos_id_;
  TokenId unk_id_;
  TokenizerPolicy policy_;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(std::string_view text);

}  // namespace cogen
