#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cogen/backends/backend.hpp"
#include "cogen/core/vocab.hpp"

namespace cogen {

enum class DatasetKind { context_aware, email, paper };

std::string_view to_string(DatasetKind kind) noexcept;
DatasetKind parse_dataset_kind(std::string_view text);

/// One user-task pair: private context (profile, history), the instruction t,
/// its context-free variant, and the gold output r.
struct CorpusRecord {
  std::string user_id;
  DatasetKind dataset_kind = DatasetKind::context_aware;
  std::string profile;
  std::vector<std::string> history;
  std::string task;
  std::string reference;
  std::string general_task;  // empty means "same as task"

  ContextBundle context() const { return {profile, history}; }
  const std::string& cloud_task() const noexcept { return general_task.empty() ? task : general_task; }
  void validate() const;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

// One JSON object per line. Blank lines are skipped; any malformed line fails
// the whole load with its 1-based line number.
std::vector<CorpusRecord> parse_corpus(std::string_view jsonl);
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);
std::string record_to_json_line(const CorpusRecord& record);
void save_corpus(const std::vector<CorpusRecord>& records, const std::filesystem::path& path);

inline constexpr std::size_t kEmailMinChars = 64;
inline constexpr std::size_t kPaperMinChars = 128;
inline constexpr std::size_t kLampMaxChars = 1024;

struct Rejection {
  CorpusRecord record;
  std::string reason;  // "below_min" or "above_max"
  std::size_t length = 0;
};

// Keeps records whose reference length in Unicode scalars lies in
// [min, 1024], min = 64 for email and 128 for paper. Bounds are inclusive.
std::pair<std::vector<CorpusRecord>, std::vector<Rejection>> filter_lamp(const std::vector<CorpusRecord>& records,
                                                                         DatasetKind kind);

// Seeded Fisher-Yates shuffle; the first floor(0.9 N) go to train.
std::pair<std::vector<CorpusRecord>, std::vector<CorpusRecord>> split_train_val(std::vector<CorpusRecord> records,
                                                                                std::uint64_t seed);

struct CorpusStats {
  std::size_t total_users = 0;
  double avg_profile_length = 0.0;  // tokens of profile plus history
  double avg_output_length = 0.0;   // tokens of the reference
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

CorpusStats corpus_stats(const std::vector<CorpusRecord>& records, TokenizerPolicy policy);
// Averages over the union; split counts from each part.
CorpusStats corpus_stats(const std::vector<CorpusRecord>& train, const std::vector<CorpusRecord>& dev,
                         const std::vector<CorpusRecord>& test, TokenizerPolicy policy);
std::string render_corpus_stats(const CorpusStats& stats, std::string_view column = "Dataset");

struct RankedTerm {
  std::string term;
  double percent = 0.0;
};

struct VerbStats {
  std::vector<RankedTerm> verbs;
  std::vector<RankedTerm> objects;
};

// First word of each task (lemmatized) as the root verb; the direct object
// is the last word of the noun phrase that follows, cut at the first
// preposition, conjunction or punctuation. Top ten of each, ties by term.
VerbStats task_verb_stats(const std::vector<CorpusRecord>& records);
std::string render_verb_stats(const VerbStats& stats);
// Exposed for tests: lemma of a root verb and the object of one task.
std::string lemmatize_verb(std::string_view word);
std::string direct_object(std::string_view task);

}  // namespace cogen
