#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include "cogen/backends/external_http.hpp"
#include "cogen/backends/ngram_model.hpp"
#include "cogen/backends/perplexity.hpp"
#include "cogen/backends/table_model.hpp"
#include "cogen/error.hpp"

using namespace cogen;

namespace {

std::vector<double> row(std::size_t n, std::vector<std::pair<TokenId, double>> set) {
  std::vector<double> r(n, 0.0);
  for (auto [id, p] : set) r[id] = p;
  return r;
}

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  TestServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("add-alpha bigram probabilities") {
  NGramModel::Options o;
  o.order = 2;
  o.alpha = 1.0;
  auto m = NGramModel::train({"a b", "a b", "a c"}, o, TokenizerPolicy::whitespace);
  const auto& v = m.vocab();
  REQUIRE(v.size() == 5);
  TokenId a = *v.find("a"), b = *v.find("b"), c = *v.find("c");
  std::vector<TokenId> h = {a};
  auto p = m.conditional(h);
  CHECK(p[b] == doctest::Approx(3.0 / 8.0));
  CHECK(p[c] == doctest::Approx(2.0 / 8.0));
  CHECK(p[v.eos_id()] == doctest::Approx(1.0 / 8.0));
  CHECK(m.count(h, b) == 2);
  std::vector<TokenId> unseen = {b};
  auto q = m.conditional(unseen);
  CHECK(q[v.eos_id()] == doctest::Approx(3.0 / 7.0));
  auto start = m.next_distribution(ConditioningInput::for_role(Role::small_device, "", std::nullopt));
  CHECK(start.prob(a) == doctest::Approx(4.0 / 8.0));
}

TEST_CASE("n-gram options are validated") {
  NGramModel::Options o;
  o.alpha = 0.0;
  CHECK_THROWS_AS(NGramModel::train({"a"}, o, TokenizerPolicy::whitespace), InvalidConfig);
  o = {};
  o.order = 0;
  CHECK_THROWS_AS(NGramModel::train({"a"}, o, TokenizerPolicy::whitespace), InvalidConfig);
  o = {};
  o.context_weight = 1.5;
  CHECK_THROWS_AS(NGramModel::train({"a"}, o, TokenizerPolicy::whitespace), InvalidConfig);
  CHECK_THROWS_AS(NGramModel::train({}, NGramModel::Options{}, TokenizerPolicy::whitespace), InvalidInput);
}

TEST_CASE("context cache mixes into the n-gram estimate") {
  NGramModel::Options o;
  o.order = 2;
  o.alpha = 1.0;
  auto base = NGramModel::train({"a b"}, o, TokenizerPolicy::whitespace);
  auto m = base.with_context_weight(0.5, 2.0);
  const auto& v = m.vocab();
  TokenId a = *v.find("a"), b = *v.find("b");
  ContextBundle ctx{"b a", {}};
  auto p = m.next_distribution(ConditioningInput::for_role(Role::small_device, "", ctx));
  CHECK(p.prob(b) == doctest::Approx(0.5 * 0.2 + 0.5 * 11.0 / 21.0));
  CHECK(p.prob(a) == doctest::Approx(0.5 * 0.4 + 0.5 * 4.0 / 21.0));
  CHECK(p.prob(v.unk_id()) == doctest::Approx(0.5 * 0.2 + 0.5 * 2.0 / 21.0));
  auto blind = m.next_distribution(ConditioningInput::for_role(Role::small_device, "", std::nullopt));
  CHECK(blind.prob(a) == doctest::Approx(0.4));
  auto again = m.next_distribution(ConditioningInput::for_role(Role::small_device, "", ctx));
  CHECK(again == p);
}

TEST_CASE("n-gram serialization round-trips byte for byte") {
  NGramModel::Options o;
  o.order = 3;
  o.alpha = 0.25;
  o.context_weight = 0.3;
  auto m = NGramModel::train({"x y z", "y z x x"}, o, TokenizerPolicy::whitespace);
  auto text = m.serialize();
  auto back = NGramModel::parse(text, Role::large_cloud);
  CHECK(back.serialize() == text);
  CHECK(back.role() == Role::large_cloud);
  CHECK(back.vocab() == m.vocab());
  auto tmp = std::filesystem::temp_directory_path() / "cogen_test_ngram.json";
  m.save(tmp);
  CHECK(NGramModel::load(tmp, Role::small_device).serialize() == text);
  std::filesystem::remove(tmp);
  CHECK_THROWS_AS(NGramModel::parse(R"({"format":"other","version":1})", Role::small_device), LoadError);
}

TEST_CASE("the privacy boundary rejects context for large_cloud inputs") {
  ContextBundle ctx{"secret profile", {"secret note"}};
  CHECK_THROWS_AS(ConditioningInput::for_role(Role::large_cloud, "t", ctx), PrivacyViolation);
  CHECK_NOTHROW(ConditioningInput::for_role(Role::large_cloud, "t", std::nullopt));
  CHECK_NOTHROW(ConditioningInput::for_role(Role::small_device, "t", ctx));
  auto m = NGramModel::train({"a"}, NGramModel::Options{}, TokenizerPolicy::whitespace);
  auto small = ConditioningInput::for_role(Role::small_device, "t", ctx);
  CHECK_THROWS_AS(m.with_role(Role::large_cloud).next_distribution(small), PrivacyViolation);
  auto bad = ConditioningInput::for_role(Role::small_device, "t", std::nullopt, {99});
  CHECK_THROWS_AS(m.next_distribution(bad), InvalidInput);
}

TEST_CASE("table rules pick the longest matching prefix then the earliest") {
  auto v = Vocab::build({"A B C D"}, TokenizerPolicy::whitespace);
  const std::size_t n = v.size();
  TokenId A = 2, B = 3, C = 4, D = 5;
  std::vector<TableModel::Rule> rules = {
      {{}, std::nullopt, row(n, {{A, 1.0}})},
      {{A}, std::nullopt, row(n, {{B, 1.0}})},
      {{A}, std::nullopt, row(n, {{C, 1.0}})},
      {{A, B}, std::string("urgent"), row(n, {{D, 1.0}})},
      {{B}, std::nullopt, row(n, {{C, 0.5}, {D, 0.5}})},
  };
  TableModel t(v, rules, row(n, {{0, 1.0}}), Role::small_device);
  auto at = [&](std::vector<TokenId> prefix, const std::string& instr) {
    return t.next_distribution(ConditioningInput::for_role(Role::small_device, instr, std::nullopt, prefix));
  };
  CHECK(at({}, "x").argmax() == A);
  CHECK(at({A}, "x").argmax() == B);
  CHECK(at({A, B}, "x").prob(C) == 0.5);
  CHECK(at({A, B}, "an urgent note").argmax() == D);
  CHECK(at({C}, "x").argmax() == A);
  CHECK_THROWS_AS(TableModel(v, {{{}, std::nullopt, row(n, {{A, 0.5}})}}, row(n, {{0, 1.0}}), Role::small_device),
                  LoadError);
}

TEST_CASE("table from_path emits the path then EOS") {
  auto v = Vocab::build({"one two three"}, TokenizerPolicy::whitespace);
  auto t = TableModel::from_path(v, {"one", "two", "three"}, Role::large_cloud);
  std::vector<TokenId> prefix;
  for (int i = 0; i < 4; ++i) {
    auto d = t.next_distribution(ConditioningInput::context_blind("", prefix));
    prefix.push_back(d.argmax());
  }
  CHECK(v.decode(prefix) == "one two three");
  CHECK(prefix.back() == v.eos_id());
  CHECK_THROWS_AS(TableModel::from_path(v, {"four"}, Role::large_cloud), InvalidInput);
}

TEST_CASE("table model parses its JSON form") {
  const char* text = R"({"format":"cogen-table","vocab":{"tokens":["</s>","<unk>","hi","there"],"eos_id":0,"unk_id":1},
    "rules":[{"prefix":[],"next":{"hi":1.0}},{"prefix":["hi"],"when":"greet","next":{"there":0.75,"</s>":0.25}}]})";
  auto t = TableModel::parse(text, Role::small_device);
  auto d = t.next_distribution(ConditioningInput::for_role(Role::small_device, "greet them", std::nullopt, {2}));
  CHECK(d.prob(3) == 0.75);
  auto e = t.next_distribution(ConditioningInput::for_role(Role::small_device, "x", std::nullopt, {2}));
  CHECK(e.prob(2) == 1.0);
  CHECK_THROWS_AS(TableModel::parse(R"({"format":"cogen-table","vocab":{"tokens":["</s>","<unk>"],"eos_id":0,"unk_id":1},"rules":[],"extra":1})",
                                    Role::small_device),
                  Error);
}

TEST_CASE("perplexity of a uniform model equals the vocabulary size") {
  auto v = Vocab::build({"p q r s t"}, TokenizerPolicy::whitespace);
  std::vector<double> u(v.size(), 1.0 / static_cast<double>(v.size()));
  TableModel t(v, {}, u, Role::small_device);
  auto r = perplexity(t, ConditioningInput::for_role(Role::small_device, "", std::nullopt), "p q zz");
  CHECK(r.tokens == 4);
  CHECK(r.perplexity == doctest::Approx(static_cast<double>(v.size())));
  TableModel eos_only(v, {}, row(v.size(), {{0, 1.0}}), Role::small_device);
  CHECK(std::isinf(perplexity(eos_only, ConditioningInput::for_role(Role::small_device, "", std::nullopt), "p").perplexity));
}

TEST_CASE("load_backend checks the expected vocab hash") {
  auto m = NGramModel::train({"a b"}, NGramModel::Options{}, TokenizerPolicy::whitespace);
  auto tmp = std::filesystem::temp_directory_path() / "cogen_test_backend.json";
  m.save(tmp);
  BackendDescriptor d{BackendKind::ngram, Role::small_device, hex64(m.vocab().hash()), tmp.string()};
  CHECK(load_backend(d)->vocab() == m.vocab());
  d.vocab_ref = "0000000000000000";
  CHECK_THROWS_AS(load_backend(d), IncompatibleVocab);
  d.kind = BackendKind::remote;
  CHECK_THROWS_AS(load_backend(d), InvalidConfig);
  std::filesystem::remove(tmp);
}

TEST_CASE("completion logprobs map onto the vocabulary") {
  auto v = Vocab::build({"yes no"}, TokenizerPolicy::whitespace);
  auto r = parse_completion_logprobs(
      R"({"choices":[{"logprobs":{"top_logprobs":[{" yes":-0.105,"no":-2.40,"maybe":-5.0}]}}]})", v, 10);
  CHECK(r.dist.prob(*v.find("yes")) == doctest::Approx(std::exp(-0.105)));
  CHECK(r.dist.prob(*v.find("no")) == doctest::Approx(std::exp(-2.40)));
  CHECK(r.lost_mass == doctest::Approx(std::exp(-5.0)));
  CHECK_FALSE(r.degraded);
  auto bad = parse_completion_logprobs(R"({"choices":[{"logprobs":{"top_logprobs":[{"x":-0.1,"yes":-3.0}]}}]})", v, 10);
  CHECK(bad.degraded);
  CHECK_THROWS_AS(parse_completion_logprobs("{}", v, 10), ProtocolError);
  CHECK_THROWS_AS(parse_completion_logprobs("not json", v, 10), ProtocolError);
}

TEST_CASE("external http backend queries a completions endpoint") {
  auto v = Vocab::build({"yes no"}, TokenizerPolicy::whitespace);
  TestServer s;
  std::string seen;
  s.server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.body;
    res.set_content(R"({"choices":[{"logprobs":{"top_logprobs":[{"yes":-0.105,"no":-2.40}]}}]})", "application/json");
  });
  s.start();
  ExternalHttpConfig cfg;
  cfg.base_url = s.url();
  cfg.model = "m1";
  ExternalHttpModel m(v, cfg);
  auto d = m.next_distribution(ConditioningInput::context_blind("Say yes", {}));
  CHECK(d.prob(2) == doctest::Approx(0.9003).epsilon(1e-3));
  CHECK(d.prob(3) == doctest::Approx(0.0907).epsilon(1e-3));
  auto body = nlohmann::json::parse(seen);
  CHECK(body["max_tokens"] == 1);
  CHECK(body["model"] == "m1");
  CHECK(body["prompt"].get<std::string>().find("Say yes") != std::string::npos);
}

TEST_CASE("external http backend times out") {
  auto v = Vocab::build({"yes no"}, TokenizerPolicy::whitespace);
  TestServer s;
  s.server.Post("/v1/completions", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content("{}", "application/json");
  });
  s.start();
  ExternalHttpConfig cfg;
  cfg.base_url = s.url();
  cfg.timeout = std::chrono::milliseconds(100);
  ExternalHttpModel m(v, cfg);
  CHECK_THROWS_AS(m.next_distribution(ConditioningInput::context_blind("x", {})), TransportError);
}
