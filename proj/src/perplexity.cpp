#include "cogen/backends/perplexity.hpp"

#include <cmath>
#include <limits>

namespace cogen {

PerplexityResult perplexity(const LanguageModel& model, const ConditioningInput& conditioning,
                            std::string_view text) {
  const auto& vocab = model.vocab();
  std::vector<TokenId> ids = vocab.encode(text);
  ids.push_back(vocab.eos_id());

  PerplexityResult result;
  double nll = 0.0;
  std::vector<TokenId> prefix;
  prefix.reserve(ids.size());
  for (TokenId id : ids) {
    const double p = model.next_distribution(conditioning.with_prefix(prefix)).prob(id);
    if (!(p > 0.0)) {
      result.tokens = ids.size();
      result.mean_nll = std::numeric_limits<double>::infinity();
      result.perplexity = std::numeric_limits<double>::infinity();
      return result;
    }
    nll -= std::log(p);
    prefix.push_back(id);
  }
  result.tokens = ids.size();
  result.mean_nll = nll / static_cast<double>(ids.size());
  result.perplexity = std::exp(result.mean_nll);
  return result;
}

}  // namespace cogen
