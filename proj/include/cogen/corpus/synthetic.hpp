#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cogen/corpus/corpus.hpp"

namespace cogen {

struct SyntheticCorpusConfig {
  std::size_t users = 40;
  std::size_t tasks_per_user = 3;   // K
  std::size_t history_items = 4;
  std::size_t entities_per_user = 5;
  std::size_t entity_pool = 60;
  std::size_t sentences_per_text = 4;
  std::uint64_t seed = 0;
};

/// Desk-scale personalized corpus. Every user owns a handful of private
/// entity words that appear in their profile, history and references; the
/// surrounding text comes from a shared template grammar. A context-blind
/// model can learn the grammar but not which entities a user writes about.
std::vector<CorpusRecord> synthetic_corpus(const SyntheticCorpusConfig& config);

// General-domain text drawn from the same grammar with entities from the
// whole pool, for training context-blind models.
std::vector<std::string> synthetic_general_text(std::size_t sentences, std::uint64_t seed,
                                                std::size_t entity_pool = 60);

}  // namespace cogen
