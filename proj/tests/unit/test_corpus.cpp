#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cogen/corpus/corpus.hpp"
#include "cogen/corpus/synthetic.hpp"
#include "cogen/error.hpp"
#include "desk.hpp"

using namespace cogen;

namespace {

std::string read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string message_of(std::string_view jsonl) {
  try {
    parse_corpus(jsonl);
  } catch (const InvalidInput& e) {
    return e.what();
  }
  return "";
}

CorpusRecord lamp(std::string user, DatasetKind kind, std::size_t scalars) {
  CorpusRecord r;
  r.user_id = std::move(user);
  r.dataset_kind = kind;
  r.task = "Write an email";
  for (std::size_t i = 0; i < scalars; ++i) r.reference += "\xc3\xa9";
  return r;
}

const char* kGood =
    R"({"user_id":"u1","dataset_kind":"context_aware","profile":"p","history":["h"],"task":"t","reference":"r"})";

}  // namespace

TEST_CASE("golden record line round-trips byte for byte") {
  auto line = read(testing::data_path("golden/corpus/record.jsonl"));
  auto records = parse_corpus(line);
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.user_id == "u001");
  CHECK(r.dataset_kind == DatasetKind::context_aware);
  CHECK(r.history == std::vector<std::string>{"Walked to the harbor at dawn."});
  CHECK(r.cloud_task() == "Write a note");
  CHECK(record_to_json_line(r) + "\n" == line);
}

TEST_CASE("parse errors carry the line number") {
  std::string two = std::string(kGood) + "\n\n{bad json\n";
  CHECK(message_of(two).find("line 3") != std::string::npos);
  std::string unknown = R"({"user_id":"u1","dataset_kind":"email","task":"t","reference":"r","extra":1})";
  CHECK(message_of(unknown).find("unknown field 'extra'") != std::string::npos);
  std::string missing = R"({"user_id":"u1","dataset_kind":"email","reference":"r"})";
  CHECK(message_of(missing).find("missing field 'task'") != std::string::npos);
  std::string dup = std::string(kGood) + "\n" + kGood + "\n";
  CHECK(message_of(dup).find("line 2") != std::string::npos);
  CHECK(message_of(dup).find("duplicate") != std::string::npos);
  std::string kind = R"({"user_id":"u1","dataset_kind":"poem","task":"t","reference":"r"})";
  CHECK(message_of(kind).find("dataset_kind") != std::string::npos);
  std::string no_profile = R"({"user_id":"u1","dataset_kind":"context_aware","profile":"","history":["h"],"task":"t","reference":"r"})";
  CHECK_FALSE(message_of(no_profile).empty());
  CHECK(parse_corpus(std::string(kGood) + "\n\n").size() == 1);
}

TEST_CASE("length filter bounds are inclusive and count scalars") {
  std::vector<CorpusRecord> rs = {lamp("a", DatasetKind::email, 63), lamp("b", DatasetKind::email, 64),
                                  lamp("c", DatasetKind::email, 1024), lamp("d", DatasetKind::email, 1025)};
  auto [kept, rejected] = filter_lamp(rs, DatasetKind::email);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].user_id == "b");
  CHECK(kept[1].user_id == "c");
  REQUIRE(rejected.size() == 2);
  CHECK(rejected[0].reason == "below_min");
  CHECK(rejected[0].length == 63);
  CHECK(rejected[1].reason == "above_max");
  std::vector<CorpusRecord> papers = {lamp("a", DatasetKind::paper, 127), lamp("b", DatasetKind::paper, 128)};
  CHECK(filter_lamp(papers, DatasetKind::paper).first.size() == 1);
  CHECK_THROWS_AS(filter_lamp(papers, DatasetKind::email), InvalidInput);
  CHECK_THROWS_AS(filter_lamp(papers, DatasetKind::context_aware), InvalidInput);
}

TEST_CASE("split is a seeded partition with floor(0.9 N) train records") {
  SyntheticCorpusConfig cfg;
  cfg.users = 7;
  cfg.seed = 3;
  auto records = synthetic_corpus(cfg);
  REQUIRE(records.size() == 21);
  auto [train, val] = split_train_val(records, 5);
  CHECK(train.size() == 18);
  CHECK(val.size() == 3);
  std::vector<std::string> all, parts;
  for (const auto& r : records) all.push_back(record_to_json_line(r));
  for (const auto& r : train) parts.push_back(record_to_json_line(r));
  for (const auto& r : val) parts.push_back(record_to_json_line(r));
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  CHECK(all == parts);
  auto again = split_train_val(records, 5);
  CHECK(again.first == train);
  auto other = split_train_val(records, 6);
  CHECK_FALSE(other.first == train);
  CHECK_THROWS_AS(split_train_val(std::vector<CorpusRecord>(records.begin(), records.begin() + 9), 1), InvalidInput);
}

TEST_CASE("corpus stats by hand") {
  CorpusRecord a;
  a.user_id = "u1";
  a.task = "t1";
  a.profile = "one two";
  a.history = {"three four five", "six"};
  a.reference = "r r r r";
  CorpusRecord b = a;
  b.task = "t2";
  b.profile = "x";
  b.history = {"y"};
  b.reference = "z z";
  CorpusRecord c = a;
  c.user_id = "u2";
  auto s = corpus_stats({a, b}, {c}, {}, TokenizerPolicy::whitespace);
  CHECK(s.total_users == 2);
  CHECK(s.avg_profile_length == doctest::Approx((6.0 + 2.0 + 6.0) / 3.0));
  CHECK(s.avg_output_length == doctest::Approx((4.0 + 2.0 + 4.0) / 3.0));
  CHECK(s.train == 2);
  CHECK(s.dev == 1);
  CHECK(s.test == 0);
  auto text = render_corpus_stats(s, "Demo");
  CHECK(text.find("Total Users         2\n") != std::string::npos);
  CHECK(text.find("Avg Profile Length  5\n") != std::string::npos);
  CHECK(text.find("Dataset             Demo\n") == 0);
}

TEST_CASE("verb lemmas and direct objects") {
  CHECK(lemmatize_verb("Write") == "write");
  CHECK(lemmatize_verb("Writing") == "write");
  CHECK(lemmatize_verb("drafted") == "draft");
  CHECK(lemmatize_verb("planned") == "plan");
  CHECK(lemmatize_verb("summarizes") == "summarize");
  CHECK(lemmatize_verb("wrote") == "write");
  CHECK(lemmatize_verb("zorbing") == "zorbing");
  CHECK(direct_object("Write a short email to my team") == "email");
  CHECK(direct_object("Draft the project update, then send it") == "update");
  CHECK(direct_object("Compose a thank-you note for Sam") == "note");
  CHECK(direct_object("Write") == "");
}

TEST_CASE("verb stats rank by share with ties by term") {
  std::vector<CorpusRecord> rs;
  const char* tasks[] = {"Write an email", "Write a poem", "Draft an email", "Compose a letter"};
  int i = 0;
  for (const char* t : tasks) {
    CorpusRecord r;
    r.user_id = "u" + std::to_string(i++);
    r.dataset_kind = DatasetKind::email;
    r.task = t;
    rs.push_back(r);
  }
  auto s = task_verb_stats(rs);
  REQUIRE(s.verbs.size() == 3);
  CHECK(s.verbs[0].term == "write");
  CHECK(s.verbs[0].percent == 50.0);
  CHECK(s.verbs[1].term == "compose");
  CHECK(s.verbs[2].term == "draft");
  REQUIRE(s.objects.size() == 3);
  CHECK(s.objects[0].term == "email");
  CHECK(s.objects[1].term == "letter");
  auto text = render_verb_stats(s);
  CHECK(text.rfind("Verb", 0) == 0);
  CHECK(text.find("write") != std::string::npos);
  CHECK(text.find("50.0") != std::string::npos);
}

TEST_CASE("synthetic corpus is deterministic and well formed") {
  SyntheticCorpusConfig cfg;
  cfg.users = 5;
  cfg.seed = 17;
  auto a = synthetic_corpus(cfg);
  auto b = synthetic_corpus(cfg);
  CHECK(a == b);
  CHECK(a.size() == 15);
  std::set<std::string> users;
  for (const auto& r : a) {
    CHECK_NOTHROW(r.validate());
    CHECK(r.dataset_kind == DatasetKind::context_aware);
    CHECK(r.history.size() == cfg.history_items);
    users.insert(r.user_id);
  }
  CHECK(users.size() == 5);
  cfg.seed = 18;
  CHECK_FALSE(synthetic_corpus(cfg) == a);
  CHECK(synthetic_general_text(20, 4) == synthetic_general_text(20, 4));
  CHECK(synthetic_general_text(20, 4).size() == 20);
}

TEST_CASE("save and load keep every record") {
  SyntheticCorpusConfig cfg;
  cfg.users = 3;
  auto rs = synthetic_corpus(cfg);
  auto tmp = std::filesystem::temp_directory_path() / "cogen_test_corpus.jsonl";
  save_corpus(rs, tmp);
  CHECK(load_corpus(tmp) == rs);
  std::filesystem::remove(tmp);
}
