#include "cogen/corpus/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "cogen/core/rng.hpp"
#include "cogen/error.hpp"
#include "json_util.hpp"

namespace cogen {

using detail::json;

std::string_view to_string(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::context_aware: return "context_aware";
    case DatasetKind::email: return "email";
    case DatasetKind::paper: return "paper";
  }
  return "context_aware";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "context_aware") return DatasetKind::context_aware;
  if (text == "email") return DatasetKind::email;
  if (text == "paper") return DatasetKind::paper;
  throw InvalidInput("unknown dataset_kind '" + std::string(text) + "'");
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

void CorpusRecord::validate() const {
  if (user_id.empty()) throw InvalidInput("user_id is empty");
  if (blank(task)) throw InvalidInput("task is empty");
  if (dataset_kind == DatasetKind::context_aware) {
    if (blank(profile)) throw InvalidInput("context_aware record '" + user_id + "' has an empty profile");
    if (history.empty()) throw InvalidInput("context_aware record '" + user_id + "' has an empty history");
  }
}

namespace {

std::string field_error(std::size_t line, std::string_view message) {
  return "line " + std::to_string(line) + ": " + std::string(message);
}

CorpusRecord record_from_json(const json& j, std::size_t line) {
  static const char* const kRequired[] = {"user_id", "dataset_kind", "task", "reference"};
  static const char* const kOptional[] = {"profile", "history", "general_task"};
  if (!j.is_object()) throw InvalidInput(field_error(line, "expected a JSON object"));
  for (const char* key : kRequired)
    if (!j.contains(key)) throw InvalidInput(field_error(line, std::string("missing field '") + key + "'"));
  for (const auto& [key, value] : j.items()) {
    bool known = std::any_of(std::begin(kRequired), std::end(kRequired), [&](const char* k) { return key == k; }) ||
                 std::any_of(std::begin(kOptional), std::end(kOptional), [&](const char* k) { return key == k; });
    if (!known) throw InvalidInput(field_error(line, "unknown field '" + key + "'"));
  }
  auto text = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    const auto& v = j.at(key);
    if (!v.is_string()) throw InvalidInput(field_error(line, std::string("field '") + key + "' must be a string"));
    return v.get<std::string>();
  };
  CorpusRecord r;
  r.user_id = text("user_id");
  try {
    r.dataset_kind = parse_dataset_kind(text("dataset_kind"));
  } catch (const InvalidInput& e) {
    throw InvalidInput(field_error(line, std::string("field 'dataset_kind': ") + e.what()));
  }
  r.profile = text("profile");
  r.task = text("task");
  r.reference = text("reference");
  r.general_task = text("general_task");
  if (j.contains("history")) {
    const auto& h = j.at("history");
    if (!h.is_array()) throw InvalidInput(field_error(line, "field 'history' must be an array of strings"));
    for (const auto& item : h) {
      if (!item.is_string()) throw InvalidInput(field_error(line, "field 'history' must be an array of strings"));
      r.history.push_back(item.get<std::string>());
    }
  }
  try {
    r.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput(field_error(line, e.what()));
  }
  return r;
}

}  // namespace

std::vector<CorpusRecord> parse_corpus(std::string_view jsonl) {
  std::vector<CorpusRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InvalidInput(field_error(line_no, std::string("malformed JSON: ") + e.what()));
    }
    auto record = record_from_json(j, line_no);
    if (!seen.emplace(record.user_id, record.task).second)
      throw InvalidInput(field_error(line_no, "duplicate (user_id, task) for user '" + record.user_id + "'"));
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(detail::read_file(path));
}

std::string record_to_json_line(const CorpusRecord& record) {
  json j{{"user_id", record.user_id},
         {"dataset_kind", std::string(to_string(record.dataset_kind))},
         {"task", record.task},
         {"reference", record.reference}};
  if (!record.profile.empty()) j["profile"] = record.profile;
  if (!record.history.empty()) j["history"] = record.history;
  if (!record.general_task.empty()) j["general_task"] = record.general_task;
  return j.dump();
}

void save_corpus(const std::vector<CorpusRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json_line(r);
    out += '\n';
  }
  detail::write_file(path, out);
}

std::pair<std::vector<CorpusRecord>, std::vector<Rejection>> filter_lamp(const std::vector<CorpusRecord>& records,
                                                                         DatasetKind kind) {
  if (kind == DatasetKind::context_aware) throw InvalidInput("filter_lamp applies to email or paper corpora");
  const std::size_t min_chars = kind == DatasetKind::email ? kEmailMinChars : kPaperMinChars;
  std::vector<CorpusRecord> kept;
  std::vector<Rejection> rejected;
  for (const auto& r : records) {
    if (r.dataset_kind != kind)
      throw InvalidInput("record of user '" + r.user_id + "' has kind " + std::string(to_string(r.dataset_kind)) +
                         ", expected " + std::string(to_string(kind)));
    auto len = count_scalars(r.reference);
    if (len < min_chars)
      rejected.push_back({r, "below_min", len});
    else if (len > kLampMaxChars)
      rejected.push_back({r, "above_max", len});
    else
      kept.push_back(r);
  }
  return {std::move(kept), std::move(rejected)};
}

std::pair<std::vector<CorpusRecord>, std::vector<CorpusRecord>> split_train_val(std::vector<CorpusRecord> records,
                                                                                std::uint64_t seed) {
  if (records.size() < 10)
    throw InvalidInput("split needs at least 10 records, got " + std::to_string(records.size()));
  Rng rng(seed);
  for (std::size_t i = records.size() - 1; i > 0; --i) std::swap(records[i], records[rng.next_below(i + 1)]);
  const std::size_t n_train = records.size() * 9 / 10;
  std::vector<CorpusRecord> val(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(n_train)),
                                std::make_move_iterator(records.end()));
  records.resize(n_train);
  return {std::move(records), std::move(val)};
}

namespace {

void accumulate(const std::vector<CorpusRecord>& records, TokenizerPolicy policy, double& profile_tokens,
                double& output_tokens, std::set<std::string>& users) {
  for (const auto& r : records) {
    profile_tokens += static_cast<double>(split_tokens(r.profile, policy).size());
    for (const auto& h : r.history) profile_tokens += static_cast<double>(split_tokens(h, policy).size());
    output_tokens += static_cast<double>(split_tokens(r.reference, policy).size());
    users.insert(r.user_id);
  }
}

}  // namespace

CorpusStats corpus_stats(const std::vector<CorpusRecord>& records, TokenizerPolicy policy) {
  return corpus_stats(records, {}, {}, policy);
}

CorpusStats corpus_stats(const std::vector<CorpusRecord>& train, const std::vector<CorpusRecord>& dev,
                         const std::vector<CorpusRecord>& test, TokenizerPolicy policy) {
  CorpusStats s;
  double profile = 0, output = 0;
  std::set<std::string> users;
  accumulate(train, policy, profile, output, users);
  accumulate(dev, policy, profile, output, users);
  accumulate(test, policy, profile, output, users);
  const auto n = train.size() + dev.size() + test.size();
  s.total_users = users.size();
  if (n > 0) {
    s.avg_profile_length = profile / static_cast<double>(n);
    s.avg_output_length = output / static_cast<double>(n);
  }
  s.train = train.size();
  s.dev = dev.size();
  s.test = test.size();
  return s;
}

namespace {

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

std::string rounded(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", std::round(v));
  return buf;
}

}  // namespace

std::string render_corpus_stats(const CorpusStats& stats, std::string_view column) {
  const std::pair<std::string, std::string> rows[] = {
      {"Dataset", std::string(column)},
      {"Total Users", std::to_string(stats.total_users)},
      {"Avg Profile Length", rounded(stats.avg_profile_length)},
      {"Output Length", rounded(stats.avg_output_length)},
      {"Train Samples", std::to_string(stats.train)},
      {"Dev Samples", std::to_string(stats.dev)},
      {"Test Samples", std::to_string(stats.test)},
  };
  std::size_t width = 0;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::string out;
  for (const auto& [label, value] : rows) out += pad(label, width + 2) + value + "\n";
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_punct(std::string_view s, bool* had_trailing = nullptr) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(s[e - 1]))) --e;
  if (had_trailing) *had_trailing = e < s.size();
  return std::string(s.substr(b, e - b));
}

const std::set<std::string>& base_verbs() {
  static const std::set<std::string> verbs = {
      "write",   "draft",   "compose", "create",   "develop", "prepare",  "craft",   "curate",
      "design",  "script",  "plan",    "outline",  "share",   "summarize", "generate", "produce",
      "make",    "post",    "give",    "describe", "explain", "propose",  "organize", "suggest",
      "reflect", "review",  "build",   "list",     "tell",    "send",     "reply",    "respond"};
  return verbs;
}

const std::map<std::string, std::string>& irregular_verbs() {
  static const std::map<std::string, std::string> table = {
      {"wrote", "write"}, {"written", "write"}, {"made", "make"}, {"gave", "give"},   {"given", "give"},
      {"told", "tell"},   {"sent", "send"},     {"built", "build"}};
  return table;
}

}  // namespace

std::string lemmatize_verb(std::string_view word) {
  auto w = lower(strip_punct(word));
  if (base_verbs().count(w)) return w;
  if (auto it = irregular_verbs().find(w); it != irregular_verbs().end()) return it->second;
  auto ends = [&](std::string_view suf) { return w.size() > suf.size() && w.ends_with(suf); };
  auto try_base = [&](std::string cand) -> std::optional<std::string> {
    if (base_verbs().count(cand)) return cand;
    return std::nullopt;
  };
  std::vector<std::string> candidates;
  if (ends("ing")) {
    auto stem = w.substr(0, w.size() - 3);
    candidates.push_back(stem);
    candidates.push_back(stem + "e");
    if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2]) candidates.push_back(stem.substr(0, stem.size() - 1));
  }
  if (ends("ed")) {
    auto stem = w.substr(0, w.size() - 2);
    candidates.push_back(stem);
    candidates.push_back(stem + "e");
    if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2]) candidates.push_back(stem.substr(0, stem.size() - 1));
  }
  if (ends("es")) candidates.push_back(w.substr(0, w.size() - 2));
  if (ends("s")) candidates.push_back(w.substr(0, w.size() - 1));
  for (auto& c : candidates)
    if (auto b = try_base(c)) return *b;
  return w;
}

namespace {

const std::set<std::string>& determiners() {
  static const std::set<std::string> d = {"a",    "an",   "the",   "my",    "your",  "our", "their",
                                          "his",  "her",  "its",   "some",  "this",  "that", "these",
                                          "those", "one", "two",   "three", "short", "brief"};
  return d;
}

const std::set<std::string>& stop_words() {
  static const std::set<std::string> s = {"for",   "to",   "about", "on",    "in",   "of",   "with", "from",
                                          "at",    "by",   "that",  "which", "and",  "or",   "as",   "into",
                                          "after", "before", "during", "describing", "detailing",
                                          "highlighting", "summarizing", "explaining", "using", "where", "when"};
  return s;
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::string direct_object(std::string_view task) {
  auto ws = words(task);
  std::string head;
  bool leading = true;
  for (std::size_t i = 1; i < ws.size(); ++i) {
    bool trailing = false;
    auto w = lower(strip_punct(ws[i], &trailing));
    if (w.empty()) break;
    if (stop_words().count(w)) break;
    if (leading && determiners().count(w)) continue;
    leading = false;
    head = w;
    if (trailing) break;
  }
  return head;
}

namespace {

std::vector<RankedTerm> rank(const std::map<std::string, std::size_t>& counts, std::size_t total) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<RankedTerm> out;
  for (std::size_t i = 0; i < items.size() && i < 10; ++i)
    out.push_back({items[i].first, 100.0 * static_cast<double>(items[i].second) / static_cast<double>(total)});
  return out;
}

}  // namespace

VerbStats task_verb_stats(const std::vector<CorpusRecord>& records) {
  std::map<std::string, std::size_t> verbs, objects;
  std::size_t total = 0;
  for (const auto& r : records) {
    auto ws = words(r.task);
    if (ws.empty()) throw InvalidInput("task of user '" + r.user_id + "' is empty");
    ++total;
    ++verbs[lemmatize_verb(ws.front())];
    auto obj = direct_object(r.task);
    if (!obj.empty()) ++objects[obj];
  }
  if (total == 0) return {};
  return {rank(verbs, total), rank(objects, total)};
}

std::string render_verb_stats(const VerbStats& stats) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  std::size_t w0 = 4, w2 = 4;
  for (const auto& t : stats.verbs) w0 = std::max(w0, t.term.size());
  for (const auto& t : stats.objects) w2 = std::max(w2, t.term.size());
  const std::string pct_head = "Percent (%)";
  std::string out = pad("Verb", w0 + 2) + pad(pct_head, pct_head.size() + 2) + pad("Noun", w2 + 2) + pct_head + "\n";
  const auto rows = std::max(stats.verbs.size(), stats.objects.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::string line;
    if (i < stats.verbs.size())
      line += pad(stats.verbs[i].term, w0 + 2) + pad(pct(stats.verbs[i].percent), pct_head.size() + 2);
    else
      line += pad("", w0 + 2 + pct_head.size() + 2);
    if (i < stats.objects.size()) line += pad(stats.objects[i].term, w2 + 2) + pct(stats.objects[i].percent);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace cogen
