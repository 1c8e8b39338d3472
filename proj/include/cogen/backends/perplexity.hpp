#pragma once

#include <cstddef>
#include <string_view>

#include "cogen/backends/backend.hpp"

namespace cogen {

struct PerplexityResult {
  double perplexity = 0.0;  // +inf when some token had zero probability
  double mean_nll = 0.0;
  std::size_t tokens = 0;   // scored positions, EOS included
};

// exp of the mean negative log probability of each token of `text` (plus the
// closing EOS) given its true prefix, under the instruction and context of
// `conditioning`.
PerplexityResult perplexity(const LanguageModel& model, const ConditioningInput& conditioning,
                            std::string_view text);

}  // namespace cogen
