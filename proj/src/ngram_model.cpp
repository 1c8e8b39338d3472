#include "cogen/backends/ngram_model.hpp"

#include <mutex>
#include <unordered_map>

#include "json_util.hpp"

namespace cogen {

using detail::json;

struct NGramModel::ContextStats {
  std::vector<double> unigram;  // u(y)
  std::unordered_map<TokenId, Row> bigram;
  std::unordered_map<TokenId, std::uint64_t> bigram_totals;
};

struct NGramModel::ContextCache {
  std::mutex mutex;
  std::unordered_map<std::uint64_t, std::shared_ptr<const ContextStats>> entries;
};

namespace {

void validate_options(const NGramModel::Options& o) {
  if (o.order < 1) throw InvalidConfig("n-gram order must be at least 1");
  if (!(o.alpha > 0.0)) throw InvalidConfig("add-alpha constant must be positive");
  if (!(o.context_weight >= 0.0 && o.context_weight <= 1.0))
    throw InvalidConfig("context weight must lie in [0, 1]");
  if (!(o.context_concentration > 0.0)) throw InvalidConfig("context concentration must be positive");
}

std::vector<TokenId> padded(const Vocab& vocab, std::string_view text, unsigned order) {
  std::vector<TokenId> ids(order - 1, vocab.eos_id());
  for (TokenId id : vocab.encode(text)) ids.push_back(id);
  ids.push_back(vocab.eos_id());
  return ids;
}

}  // namespace

NGramModel::NGramModel(std::shared_ptr<const Data> data, Role role)
    : LanguageModel(role), data_(std::move(data)), cache_(std::make_shared<ContextCache>()) {}

NGramModel NGramModel::train(const std::vector<std::string>& corpus, const Options& options,
                             TokenizerPolicy policy, Role role) {
  if (corpus.empty()) throw InvalidInput("cannot train an n-gram model on an empty corpus");
  return train(corpus, options, Vocab::build(corpus, policy), role);
}

NGramModel NGramModel::train(const std::vector<std::string>& corpus, const Options& options,
                             const Vocab& vocab, Role role) {
  if (corpus.empty()) throw InvalidInput("cannot train an n-gram model on an empty corpus");
  validate_options(options);
  auto data = std::make_shared<Data>(Data{vocab, options, {}, {}});
  const unsigned n = options.order;
  for (const auto& text : corpus) {
    auto ids = padded(vocab, text, n);
    for (std::size_t i = n - 1; i < ids.size(); ++i) {
      History h(ids.begin() + static_cast<std::ptrdiff_t>(i - (n - 1)), ids.begin() + static_cast<std::ptrdiff_t>(i));
      ++data->counts[h][ids[i]];
      ++data->totals[h];
    }
  }
  return NGramModel(std::move(data), role);
}

NGramModel NGramModel::with_role(Role role) const { return NGramModel(data_, role); }

NGramModel NGramModel::with_context_weight(double weight, double concentration) const {
  auto data = std::make_shared<Data>(*data_);
  data->options.context_weight = weight;
  data->options.context_concentration = concentration;
  validate_options(data->options);
  return NGramModel(std::move(data), role());
}

std::uint32_t NGramModel::count(std::span<const TokenId> history, TokenId next) const {
  auto it = data_->counts.find(History(history.begin(), history.end()));
  if (it == data_->counts.end()) return 0;
  auto jt = it->second.find(next);
  return jt == it->second.end() ? 0 : jt->second;
}

std::vector<double> NGramModel::conditional(std::span<const TokenId> history) const {
  const auto& d = *data_;
  const std::size_t V = d.vocab.size();
  const std::size_t need = d.options.order - 1;
  History h(need, d.vocab.eos_id());
  const std::size_t take = std::min(need, history.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(), h.end() - static_cast<std::ptrdiff_t>(take));

  std::uint64_t total = 0;
  const Row* row = nullptr;
  if (auto it = d.counts.find(h); it != d.counts.end()) {
    row = &it->second;
    total = d.totals.at(h);
  }
  const double alpha = d.options.alpha;
  const double denom = static_cast<double>(total) + alpha * static_cast<double>(V);
  std::vector<double> p(V, alpha / denom);
  if (row)
    for (const auto& [id, c] : *row) p[id] = (static_cast<double>(c) + alpha) / denom;
  return p;
}

std::shared_ptr<const NGramModel::ContextStats> NGramModel::context_stats(const ContextBundle& context) const {
  std::string key_material = context.profile;
  for (const auto& h : context.history) {
    key_material += '\x1f';
    key_material += h;
  }
  const std::uint64_t key = fnv1a64(key_material);
  {
    std::lock_guard lock(cache_->mutex);
    if (auto it = cache_->entries.find(key); it != cache_->entries.end()) return it->second;
  }

  const auto& vocab = data_->vocab;
  const std::size_t V = vocab.size();
  auto stats = std::make_shared<ContextStats>();
  std::vector<double> counts(V, 0.0);
  double n_tokens = 0.0;
  auto absorb = [&](const std::string& text) {
    if (text.empty()) return;
    auto ids = padded(vocab, text, 2);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      counts[ids[i]] += 1.0;
      n_tokens += 1.0;
      ++stats->bigram[ids[i - 1]][ids[i]];
      ++stats->bigram_totals[ids[i - 1]];
    }
  };
  absorb(context.profile);
  for (const auto& h : context.history) absorb(h);

  const double alpha = data_->options.alpha;
  stats->unigram.resize(V);
  for (std::size_t y = 0; y < V; ++y)
    stats->unigram[y] = (counts[y] + alpha) / (n_tokens + alpha * static_cast<double>(V));

  std::lock_guard lock(cache_->mutex);
  if (cache_->entries.size() >= 256) cache_->entries.clear();
  cache_->entries.emplace(key, stats);
  return stats;
}

TokenDistribution NGramModel::do_next(const ConditioningInput& input) const {
  std::vector<double> p = conditional(input.prefix());
  const auto& o = data_->options;
  if (o.context_weight > 0.0 && input.context() && !input.context()->empty()) {
    auto stats = context_stats(*input.context());
    const TokenId prev = input.prefix().empty() ? data_->vocab.eos_id() : input.prefix().back();
    const double beta = o.context_concentration;
    const Row* row = nullptr;
    double total = 0.0;
    if (auto it = stats->bigram.find(prev); it != stats->bigram.end()) {
      row = &it->second;
      total = static_cast<double>(stats->bigram_totals.at(prev));
    }
    const double lambda = o.context_weight;
    for (std::size_t y = 0; y < p.size(); ++y) {
      double c = 0.0;
      if (row)
        if (auto jt = row->find(static_cast<TokenId>(y)); jt != row->end()) c = jt->second;
      const double cache = (c + beta * stats->unigram[y]) / (total + beta);
      p[y] = (1.0 - lambda) * p[y] + lambda * cache;
    }
  }
  return TokenDistribution::dense(std::move(p));
}

std::string NGramModel::serialize() const {
  const auto& d = *data_;
  json counts = json::array();
  for (const auto& [h, row] : d.counts) {
    json entries = json::array();
    for (const auto& [id, c] : row) entries.push_back({id, c});
    counts.push_back({h, entries});
  }
  json j = {{"format", "cogen-ngram"},
            {"version", 1},
            {"order", d.options.order},
            {"alpha", d.options.alpha},
            {"context_weight", d.options.context_weight},
            {"context_concentration", d.options.context_concentration},
            {"vocab", detail::vocab_to_json(d.vocab)},
            {"counts", counts}};
  return j.dump() + "\n";
}

void NGramModel::save(const std::filesystem::path& path) const { detail::write_file(path, serialize()); }

NGramModel NGramModel::parse(std::string_view json_text, Role role) {
  json j = detail::parse_json(json_text, "n-gram model");
  detail::require_keys(j, {"format", "version", "order", "alpha", "vocab", "counts"},
                       {"context_weight", "context_concentration"}, "n-gram model");
  if (j.at("format") != "cogen-ngram") throw LoadError("n-gram model: format must be 'cogen-ngram'");
  if (j.at("version") != 1) throw LoadError("n-gram model: unsupported version");
  Options o;
  o.order = j.at("order").get<unsigned>();
  o.alpha = j.at("alpha").get<double>();
  o.context_weight = j.value("context_weight", 0.0);
  o.context_concentration = j.value("context_concentration", 2.0);
  validate_options(o);
  auto data = std::make_shared<Data>(Data{detail::vocab_from_json(j.at("vocab")), o, {}, {}});
  for (const auto& entry : j.at("counts")) {
    History h = entry.at(0).get<History>();
    if (h.size() != o.order - 1) throw LoadError("n-gram model: history length does not match order");
    for (TokenId id : h)
      if (!data->vocab.contains(id)) throw LoadError("n-gram model: history id outside vocabulary");
    Row& row = data->counts[h];
    std::uint64_t total = 0;
    for (const auto& pair : entry.at(1)) {
      TokenId id = pair.at(0).get<TokenId>();
      auto c = pair.at(1).get<std::uint32_t>();
      if (!data->vocab.contains(id) || c < 1) throw LoadError("n-gram model: invalid count entry");
      row[id] = c;
      total += c;
    }
    data->totals[h] = total;
  }
  return NGramModel(std::move(data), role);
}

NGramModel NGramModel::load(const std::filesystem::path& path, Role role) {
  return parse(detail::read_file(path), role);
}

}  // namespace cogen
