#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cogen/core/vocab.hpp"
#include "cogen/error.hpp"

namespace cogen::detail {

using nlohmann::json;

template <class E = LoadError>
void require_keys(const json& j, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional, std::string_view what) {
  if (!j.is_object()) throw E(std::string(what) + ": expected a JSON object");
  for (auto key : required)
    if (!j.contains(std::string(key)))
      throw E(std::string(what) + ": missing field '" + std::string(key) + "'");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto k : required) known = known || k == key;
    for (auto k : optional) known = known || k == key;
    if (!known) throw E(std::string(what) + ": unknown field '" + key + "'");
  }
}

inline std::string double_bits(double v) { return hex64(std::bit_cast<std::uint64_t>(v)); }
inline double bits_double(std::string_view hex) { return std::bit_cast<double>(parse_hex64(hex)); }

inline json vocab_to_json(const Vocab& vocab) {
  return json{{"policy", std::string(to_string(vocab.policy()))},
              {"tokens", vocab.tokens()},
              {"eos_id", vocab.eos_id()},
              {"unk_id", vocab.unk_id()}};
}

inline Vocab vocab_from_json(const json& j) {
  require_keys(j, {"tokens", "eos_id", "unk_id"}, {"policy"}, "vocab");
  auto policy = j.contains("policy") ? parse_tokenizer_policy(j.at("policy").get<std::string>())
                                     : TokenizerPolicy::whitespace;
  return Vocab(j.at("tokens").get<std::vector<std::string>>(), j.at("eos_id").get<TokenId>(),
               j.at("unk_id").get<TokenId>(), policy);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("short write to '" + path.string() + "'");
}

inline json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string(what) + ": " + e.what());
  }
}

}  // namespace cogen::detail
