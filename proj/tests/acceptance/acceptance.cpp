// Acceptance criteria: one PASS/FAIL line each. Exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cogen/backends/table_model.hpp"
#include "cogen/report/report.hpp"
#include "cogen/service/audit.hpp"
#include "cogen/service/service.hpp"
#include "cogen/service/wire.hpp"
#include "desk.hpp"
#include "json_util.hpp"

using namespace cogen;
using namespace cogen::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_probs(std::mt19937_64& g, std::size_t n, double sharpness, double zero_rate) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& x : p) {
    x = unit(g) < zero_rate ? 0.0 : std::exp(sharpness * normal(g));
    sum += x;
  }
  if (sum == 0.0) {
    p[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : p) x /= sum;
  return p;
}

TokenId draw(std::mt19937_64& g, const std::vector<double>& p) {
  std::discrete_distribution<TokenId> d(p.begin(), p.end());
  return d(g);
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------

Verdict fusion_correctness() {
  auto t0 = Clock::now();
  std::mt19937_64 g(1001);
  std::uniform_real_distribution<double> unit;
  auto params = comb_init(17);
  std::size_t bad_sum = 0, bad_exact = 0, exact_checks = 0;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    std::size_t v = 2 + g() % 63;
    auto p_s = TokenDistribution::dense(random_probs(g, v, 1.5, 0.2));
    auto p_l_dense = TokenDistribution::dense(random_probs(g, v, 1.5, 0.2));
    bool both_dense = i % 2 == 0;
    auto p_l = both_dense ? p_l_dense : top_k_project(p_l_dense, 10);
    auto pair = align_supports(p_s, p_l);
    auto x = comb_features(p_l, p_s);
    double w_learned = comb_forward(params, std::span(x).first(10), std::span(x).subspan(10));
    std::vector<std::pair<FusionStrategy, std::optional<double>>> strategies = {
        {FusionStrategy::fixed(unit(g)), std::nullopt},
        {FusionStrategy::mean(), std::nullopt},
        {FusionStrategy::max(), std::nullopt},
        {FusionStrategy::learnable(), w_learned},
    };
    for (const auto& [s, w] : strategies) {
      auto r = fuse(pair, s, w);
      double sum = 0.0;
      bool negative = false;
      for (double p : r.dist.to_vector()) {
        sum += p;
        negative = negative || p < 0.0;
      }
      worst = std::max(worst, std::fabs(sum - 1.0));
      if (std::fabs(sum - 1.0) >= 1e-9 || negative || !(r.w_used >= 0.0 && r.w_used <= 1.0)) ++bad_sum;
    }
    if (both_dense) {
      exact_checks += 2;
      auto one = fuse(pair, FusionStrategy::fixed(1.0));
      auto zero = fuse(pair, FusionStrategy::fixed(0.0));
      if (!bit_equal(one.dist.to_vector(), p_s.probs())) ++bad_exact;
      if (!bit_equal(zero.dist.to_vector(), p_l.probs())) ++bad_exact;
    }
  }
  double dt = seconds_since(t0);
  bool pass = bad_sum == 0 && bad_exact == 0 && dt < 5.0;
  return {pass, fmt("40000 fusions, max |sum-1| %.2e, %zu bad; %zu/%zu fixed(1)/fixed(0) bit-exact; %.2fs", worst,
                    bad_sum, exact_checks - bad_exact, exact_checks, dt)};
}

// ---------------------------------------------------------------------------

CombExample random_example(std::mt19937_64& g) {
  for (;;) {
    std::size_t v = 12 + g() % 30;
    auto p_s = TokenDistribution::dense(random_probs(g, v, 1.2, 0.0));
    auto p_l = top_k_project(TokenDistribution::dense(random_probs(g, v, 1.2, 0.0)), 10);
    auto ex = make_comb_example(p_s, p_l, static_cast<TokenId>(g() % v));
    if (ex) return *ex;
  }
}

Verdict comb_gradient_check() {
  auto t0 = Clock::now();
  std::mt19937_64 g(2002);
  std::normal_distribution<double> normal;
  auto params = comb_init(23);
  for (auto& b : params.b1) b = 0.05 * normal(g);
  for (auto& b : params.b2) b = 0.05 * normal(g);
  const double h = 1e-5;
  const std::size_t pairs = 120;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t n = 0; n < pairs; ++n) {
    auto ex = random_example(g);
    auto analytic = comb_grad(params, ex);
    auto a_blocks = analytic.blocks();
    auto p_blocks = params.blocks();
    double pair_err = 0.0;
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
      auto block = p_blocks[b];
      std::vector<std::size_t> coords;
      if (block.size() <= 16) {
        for (std::size_t i = 0; i < block.size(); ++i) coords.push_back(i);
      } else {
        for (int k = 0; k < 12; ++k) coords.push_back(g() % block.size());
      }
      double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
      for (auto i : coords) {
        double saved = block[i];
        block[i] = saved + h;
        double up = comb_loss(params, ex);
        block[i] = saved - h;
        double down = comb_loss(params, ex);
        block[i] = saved;
        double numeric = (up - down) / (2 * h);
        double a = a_blocks[b][i];
        diff2 += (a - numeric) * (a - numeric);
        a2 += a * a;
        n2 += numeric * numeric;
      }
      double scale = std::max(std::sqrt(a2), std::sqrt(n2));
      double err = scale < 1e-12 ? std::sqrt(diff2) : std::sqrt(diff2) / scale;
      pair_err = std::max(pair_err, err);
    }
    worst = std::max(worst, pair_err);
    if (pair_err < 1e-4) ++ok;
  }
  double dt = seconds_since(t0);
  bool pass = ok == pairs && pairs >= 100 && dt < 30.0;
  return {pass, fmt("%zu/%zu pairs below 1e-4, worst relative error %.2e; %.2fs", ok, pairs, worst, dt)};
}

// ---------------------------------------------------------------------------

// Targets drawn from the informative side; the other side is uniform.
std::vector<CombExample> one_sided(std::mt19937_64& g, std::size_t n, bool slm_informative) {
  const std::size_t v = 32;
  std::vector<CombExample> out;
  auto uniform = TokenDistribution::uniform(v);
  while (out.size() < n) {
    auto probs = random_probs(g, v, 2.0, 0.0);
    auto informative = TokenDistribution::dense(probs);
    auto target = draw(g, probs);
    auto ex = slm_informative ? make_comb_example(informative, uniform, target)
                              : make_comb_example(uniform, informative, target);
    if (ex) out.push_back(std::move(*ex));
  }
  return out;
}

struct OneSidedResult {
  double mean_w, fused, slm, llm;
};

OneSidedResult run_one_sided(bool slm_informative, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto train = one_sided(g, 2000, slm_informative);
  auto val = one_sided(g, 400, slm_informative);
  auto test = one_sided(g, 2000, slm_informative);
  CombTrainConfig tc;
  tc.learning_rate = 2e-3;
  tc.batch_size = 2;
  tc.seed = seed;
  auto [params, report] = comb_train(train, val, tc);
  OneSidedResult r{0, 0, 0, 0};
  for (const auto& ex : test) {
    r.mean_w += comb_forward(params, ex.top10_l, ex.top10_s);
    r.fused += comb_loss(params, ex);
    r.slm += comb_loss_at(ex, 1.0);
    r.llm += comb_loss_at(ex, 0.0);
  }
  double n = static_cast<double>(test.size());
  return {r.mean_w / n, r.fused / n, r.slm / n, r.llm / n};
}

Verdict comb_learning() {
  auto t0 = Clock::now();
  auto a = run_one_sided(true, 3003);
  auto b = run_one_sided(false, 3004);
  double dt = seconds_since(t0);
  bool pass = a.mean_w > 0.9 && a.fused <= std::min(a.slm, a.llm) + 0.01 && b.mean_w < 0.1 && dt < 60.0;
  return {pass, fmt("slm-side w %.3f, NLL fused %.4f slm %.4f llm %.4f; mirrored w %.3f; %.1fs", a.mean_w, a.fused,
                    a.slm, a.llm, b.mean_w, dt)};
}

// ---------------------------------------------------------------------------

std::vector<Desk>& desks() {
  static std::vector<Desk> d = [] {
    std::vector<Desk> v;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) v.push_back(make_desk(seed));
    return v;
  }();
  return d;
}

Verdict personalized_ordering() {
  auto t0 = Clock::now();
  std::size_t ok = 0;
  std::string detail;
  for (auto& d : desks()) {
    double s = perplexity_of(pooled_nll(d, reference_nll_slm));
    double l = perplexity_of(pooled_nll(d, reference_nll_llm));
    double mean = perplexity_of(pooled_nll(d, [](const ScoreInputs& in) { return reference_nll(in, FusionStrategy::mean()); }));
    double max = perplexity_of(pooled_nll(d, [](const ScoreInputs& in) { return reference_nll(in, FusionStrategy::max()); }));
    double learn =
        perplexity_of(pooled_nll(d, [](const ScoreInputs& in) { return reference_nll(in, FusionStrategy::learnable()); }));
    bool good = learn <= max && learn <= mean && std::max({mean, max, learn}) <= std::min(s, l);
    ok += good;
    detail += fmt(" [slm %.2f llm %.2f mean %.2f max %.2f learn %.2f]", s, l, mean, max, learn);
  }
  bool pass = ok >= 4;
  return {pass, fmt("%zu/5 seeds ordered;", ok) + detail + fmt("; %.1fs", seconds_since(t0))};
}

// ---------------------------------------------------------------------------

GenerationSession session_for(const Desk& d, const CorpusRecord& r, DecodeMode mode, std::uint64_t seed) {
  GenerationSession s;
  s.record = &r;
  s.mode = std::move(mode);
  s.sampling.seed = seed;
  s.sampling.max_new_tokens = 64;
  s.slm = d.slm.get();
  s.llm = d.cloud.get();
  s.comb = &d.comb;
  return s;
}

Verdict first_k_degeneracies() {
  auto t0 = Clock::now();
  std::size_t cases = 0, bad = 0;
  for (auto& d : desks()) {
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& r = d.val[i];
      for (auto strategy : {FusionStrategy::mean(), FusionStrategy::max(), FusionStrategy::learnable()}) {
        std::uint64_t seed = 100 + i;
        auto slm = decode(session_for(d, r, DecodeMode::slm_only(), seed));
        auto k0 = decode(session_for(d, r, DecodeMode::first_k(0, strategy), seed));
        auto full = decode(session_for(d, r, DecodeMode::logit_fusion(strategy), seed));
        auto at_len = decode(session_for(d, r, DecodeMode::first_k(full.tokens.size(), strategy), seed));
        auto past = decode(session_for(d, r, DecodeMode::first_k(full.tokens.size() + 7, strategy), seed));
        cases += 3;
        bad += !(k0.tokens == slm.tokens && k0.trace.steps == slm.trace.steps);
        bad += !(at_len.tokens == full.tokens && at_len.trace.steps == full.trace.steps);
        bad += !(past.tokens == full.tokens && past.trace.steps == full.trace.steps);
      }
    }
  }
  const std::vector<std::size_t> ns = {0, 1, 2, 4, 8, 16, 32, static_cast<std::size_t>(-1)};
  std::vector<double> avg(ns.size(), 0.0);
  for (auto& d : desks())
    for (std::size_t j = 0; j < ns.size(); ++j)
      avg[j] += perplexity_of(pooled_nll(d, [&](const ScoreInputs& in) {
                  return reference_nll(in, FusionStrategy::mean(), ns[j]);
                })) /
                static_cast<double>(desks().size());
  bool monotone = true;
  std::string curve;
  for (std::size_t j = 0; j < ns.size(); ++j) {
    if (j && avg[j] > avg[j - 1]) monotone = false;
    curve += fmt(" %s:%.3f", j + 1 == ns.size() ? "all" : std::to_string(ns[j]).c_str(), avg[j]);
  }
  bool pass = bad == 0 && monotone;
  return {pass, fmt("%zu/%zu degeneracy cases identical; ppl by n", cases - bad, cases) + curve +
                    (monotone ? " (non-increasing)" : " (NOT monotone)") + fmt("; %.1fs", seconds_since(t0))};
}

// ---------------------------------------------------------------------------

DecodeMode random_mode(std::mt19937_64& g) {
  std::uniform_real_distribution<double> unit;
  auto strategy = [&]() {
    switch (g() % 4) {
      case 0: return FusionStrategy::mean();
      case 1: return FusionStrategy::max();
      case 2: return FusionStrategy::fixed(unit(g));
      default: return FusionStrategy::learnable();
    }
  };
  switch (g() % 5) {
    case 0:
    case 1: return DecodeMode::logit_fusion(strategy());
    case 2: return DecodeMode::first_k(g() % 12, strategy());
    case 3: return DecodeMode::llm_only_no_context();
    default: return DecodeMode::sketch_then_fill(FillConditioning::full_content);
  }
}

struct SessionLogs {
  std::vector<std::pair<const CorpusRecord*, std::vector<std::string>>> logs;
};

SessionLogs& audit_logs() {
  static SessionLogs logs;
  return logs;
}

Verdict remote_equivalence() {
  auto t0 = Clock::now();
  auto f = load_fixture_desk();
  auto comb = comb_init(5);
  LogitServer server(f.llm, ServerConfig{"127.0.0.1:0", true, {}});
  server.start();
  std::mt19937_64 g(6006);
  std::uniform_real_distribution<double> unit;
  std::size_t same = 0;
  const std::size_t sessions = 50;
  std::set<std::string> kinds;  // (mode, strategy) combinations
  for (std::size_t i = 0; i < sessions; ++i) {
    const auto& r = f.records[g() % f.records.size()];
    GenerationSession s;
    s.record = &r;
    s.mode = random_mode(g);
    s.sampling.seed = g();
    s.sampling.temperature = 0.5 + unit(g) * 0.7;
    s.sampling.top_p = 0.7 + unit(g) * 0.3;
    s.sampling.greedy = g() % 10 == 0;
    s.sampling.max_new_tokens = 48;
    s.slm = f.slm.get();
    s.comb = &comb;
    kinds.insert(std::to_string(static_cast<int>(s.mode.kind)) + "/" +
                 (s.mode.uses_fusion() ? std::to_string(static_cast<int>(s.mode.strategy.kind)) : "-"));

    LocalCloudModel local(f.llm, "s" + std::to_string(i));
    RemoteCloudModel remote(server.address(), f.slm->vocab(), RemoteOptions{"s" + std::to_string(i), 10000});
    auto local_log = std::make_shared<RequestLog>();
    auto remote_log = std::make_shared<RequestLog>();
    local.set_request_log(local_log);
    remote.set_request_log(remote_log);
    s.llm = &local;
    auto a = decode(s);
    s.llm = &remote;
    auto b = decode(s);
    // The remote log starts with the hello handshake.
    auto remote_payloads = remote_log->payloads();
    bool handshake = remote_payloads.empty() || decode_request(remote_payloads.front()).kind == WireKind::hello;
    if (!remote_payloads.empty()) remote_payloads.erase(remote_payloads.begin());
    same += handshake && a.tokens == b.tokens && a.trace == b.trace && a.draft_text == b.draft_text &&
            local_log->payloads() == remote_payloads;
    audit_logs().logs.push_back({&r, local_log->payloads()});
    audit_logs().logs.push_back({&r, remote_log->payloads()});
  }
  server.stop();
  double dt = seconds_since(t0);
  bool pass = same == sessions && dt < 60.0;
  return {pass, fmt("%zu/%zu sessions identical over %zu mode/strategy combinations, %zu server requests; %.1fs", same, sessions,
                    kinds.size(), server.log().size(), dt)};
}

// ---------------------------------------------------------------------------

Verdict privacy() {
  auto t0 = Clock::now();
  auto f = load_fixture_desk();
  // A cloud model that answers the sketch prompt with numbered points.
  auto sketcher = std::make_shared<TableModel>(TableModel::from_path(
      f.slm->vocab(), {"1.", "plan", "the", "market", "2.", "notes", "from", "the", "garden"}, Role::large_cloud));
  std::size_t sessions = 0, passed = 0;
  auto check = [&](const CorpusRecord& r, const std::vector<std::string>& payloads) {
    ++sessions;
    passed += privacy_audit(payloads, r.context()).pass;
  };
  for (const auto& [r, payloads] : audit_logs().logs) check(*r, payloads);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& r = f.records[i];
    std::vector<DecodeMode> modes = {DecodeMode::logit_fusion(FusionStrategy::mean()),
                                     DecodeMode::logit_fusion(FusionStrategy::max()),
                                     DecodeMode::first_k(3, FusionStrategy::mean()),
                                     DecodeMode::sketch_then_fill(FillConditioning::full_content)};
    for (auto& m : modes) {
      LocalCloudModel cloud(f.llm);
      auto log = std::make_shared<RequestLog>();
      cloud.set_request_log(log);
      GenerationSession s;
      s.record = &r;
      s.mode = m;
      s.sampling.seed = i;
      s.sampling.max_new_tokens = 32;
      s.slm = f.slm.get();
      s.llm = &cloud;
      decode(s);
      check(r, log->payloads());
    }
    LocalCloudModel cloud(sketcher);
    auto log = std::make_shared<RequestLog>();
    cloud.set_request_log(log);
    GenerationSession s;
    s.record = &r;
    s.mode = DecodeMode::sketch_then_fill(FillConditioning::sketch);
    s.sampling.seed = i;
    s.sampling.max_new_tokens = 32;
    s.slm = f.slm.get();
    s.llm = &cloud;
    auto result = decode(s);
    if (!result.sketch || result.sketch->points.size() != 2) continue;
    check(r, log->payloads());
  }

  // Planted leaks: a profile span and a history span pasted into the
  // instruction. The expected offset is the first position of the normalized
  // payload whose window occurs anywhere in the normalized field.
  const auto& r = f.records[0];
  std::size_t located = 0, planted = 0;
  auto plant = [&](const std::string& secret, std::size_t field_index) {
    ++planted;
    const std::string field = field_index == 0 ? "profile" : "history[" + std::to_string(field_index - 1) + "]";
    const auto field_text = normalize_for_audit(field_index == 0 ? r.profile : r.history[field_index - 1]);
    WireRequest req;
    req.session = "leak";
    req.instruction = "Draft a post. " + secret;
    req.prefix_ids = {3, 4};
    auto payload = encode_request(req);
    std::vector<std::string> payloads = {encode_request(WireRequest{WireKind::hello, "leak", {}, {}, 10, {}}), payload};
    auto v = privacy_audit(payloads, r.context());
    auto text = normalize_for_audit(payload);
    std::size_t expected = std::string::npos;
    for (std::size_t i = 0; i + kAuditWindow <= text.size() && expected == std::string::npos; ++i)
      if (field_text.find(text.substr(i, kAuditWindow)) != std::string::npos) expected = i;
    for (const auto& finding : v.findings)
      if (finding.field == field)
        located += !v.pass && finding.request_index == 1 && finding.offset == expected &&
                   finding.excerpt == text.substr(expected, kAuditWindow);
  };
  plant(r.profile.substr(r.profile.size() / 3, 40), 0);
  plant(r.history[2].substr(10, 30), 3);

  double dt = seconds_since(t0);
  bool pass = passed == sessions && sessions > 0 && located == planted;
  return {pass, fmt("%zu/%zu session audits pass; %zu/%zu planted leaks caught at the right field and offset; %.1fs",
                    passed, sessions, located, planted, dt)};
}

// ---------------------------------------------------------------------------

// Brute-force oracles: explicit n-gram multisets and subsequence enumeration.
double bleu_oracle(const Tokens& c, const std::vector<Tokens>& refs) {
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::map<Tokens, int> cand;
    for (std::size_t i = 0; i + n <= c.size(); ++i) ++cand[Tokens(c.begin() + i, c.begin() + i + n)];
    std::map<Tokens, int> best;
    for (const auto& r : refs) {
      std::map<Tokens, int> rc;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++rc[Tokens(r.begin() + i, r.begin() + i + n)];
      for (const auto& [k, v] : rc) best[k] = std::max(best[k], v);
    }
    int matched = 0, total = 0;
    for (const auto& [k, v] : cand) {
      total += v;
      matched += std::min(v, best.count(k) ? best[k] : 0);
    }
    double p;
    if (total == 0) p = 1.0;
    else if (matched == 0) {
      if (n == 1) return 0.0;
      p = 1.0 / (total + 1.0);
    } else p = static_cast<double>(matched) / total;
    log_sum += std::log(p);
  }
  std::size_t r_len = refs[0].size();
  for (const auto& r : refs) {
    long d = std::labs(static_cast<long>(r.size()) - static_cast<long>(c.size()));
    long bd = std::labs(static_cast<long>(r_len) - static_cast<long>(c.size()));
    if (d < bd || (d == bd && r.size() < r_len)) r_len = r.size();
  }
  double bp = c.size() >= r_len ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / c.size());
  return bp * std::exp(log_sum / 4.0);
}

std::size_t lcs_oracle(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask >> i & 1) sub.push_back(a[i]);
    std::size_t j = 0;
    for (std::size_t i = 0; i < b.size() && j < sub.size(); ++i)
      if (b[i] == sub[j]) ++j;
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

Verdict metric_oracles() {
  std::mt19937_64 g(8008);
  const Tokens words = {"a", "b", "c", "d", "e"};
  auto sentence = [&](std::size_t min_len) {
    Tokens t(min_len + g() % (11 - min_len));
    for (auto& w : t) w = words[g() % words.size()];
    return t;
  };
  std::size_t ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto c = sentence(1);
    std::vector<Tokens> refs = {sentence(1)};
    if (i % 3 == 0) refs.push_back(sentence(1));
    double b = bleu(c, refs), bo = bleu_oracle(c, refs);
    auto rl = rouge_l(c, refs[0]);
    double lcs = static_cast<double>(lcs_oracle(c, refs[0]));
    double p = lcs / c.size(), r = lcs / refs[0].size();
    double f = lcs == 0 ? 0.0 : 2 * p * r / (p + r);
    double err = std::max({std::fabs(b - bo), std::fabs(rl.p - p), std::fabs(rl.r - r), std::fabs(rl.f - f)});
    worst = std::max(worst, err);
    ok += err <= 1e-9;
  }
  std::size_t identity_ok = 0;
  for (int i = 0; i < 50; ++i) {
    auto c = sentence(1);
    auto rl = rouge_l(c, c);
    identity_ok += bleu(c, {c}) == 1.0 && rl.p == 1.0 && rl.r == 1.0 && rl.f == 1.0;
  }
  bool pass = ok == 200 && identity_ok == 50;
  return {pass, fmt("%zu/200 random cases within 1e-9 (worst %.1e); %zu/50 identity cases exactly 1.0", ok, worst,
                    identity_ok)};
}

// ---------------------------------------------------------------------------

Verdict template_goldens() {
  const auto& t = TemplateSet::defaults();
  std::size_t ok = 0, total = 0;
  std::string mismatched;
  auto expect = [&](const std::string& golden, const std::string& actual) {
    ++total;
    std::string want;
    try {
      want = detail::read_file(data_path("golden/prompts/" + golden + ".txt"));
    } catch (const Error&) {
    }
    if (want == actual && !want.empty()) ++ok;
    else mismatched += " " + golden;
  };
  const char* ids[] = {"system_no_context", "system_context_aware", "system_lamp",
                       "user_context_aware_with", "user_context_aware_without", "user_email_with",
                       "user_email_without", "user_paper_with", "user_paper_without",
                       "sketch_context_aware", "sketch_email", "sketch_paper",
                       "judge_overall_with_profile", "judge_overall_no_profile", "judge_personalization"};
  for (const char* id : ids) expect(std::string("raw/") + id, t.text(id));

  CorpusRecord r;
  r.user_id = "u001";
  r.profile = "Name: Ada Brandt. Lives in Lisbon; keeps a tide-pool journal.";
  r.history = {"Walked to the harbor at dawn and counted crabs.", "Notes for {task} stay literal here."};
  r.task = "Write a note inviting friends to the harbor walk";
  r.reference = "See you there.";
  for (auto kind : {DatasetKind::context_aware, DatasetKind::email, DatasetKind::paper}) {
    r.dataset_kind = kind;
    std::string k(to_string(kind));
    expect("rendered/request_" + k + "_with", build_request_prompt(r, true, kind).joined());
    expect("rendered/request_" + k + "_without", build_request_prompt(r, false, kind).joined());
    expect("rendered/sketch_" + k, build_sketch_prompt(r.task, kind));
  }
  const std::string answer = "1. Greeting\n2. Harbor walk plan";
  for (auto kind : {JudgeKind::overall_with_profile, JudgeKind::overall_no_profile, JudgeKind::personalization})
    expect("rendered/judge_" + std::string(to_string(kind)), build_judge_prompt(kind, r, answer));

  bool phrases = t.text("system_lamp").find("emulate the author's style and tone") != std::string::npos &&
                 t.text("sketch_paper").find("Generally, the skeleton should have 8-15 points") != std::string::npos;
  bool pass = ok == total && phrases;
  return {pass, fmt("%zu/%zu templates and renderings byte-identical; key phrases %s", ok, total,
                    phrases ? "present" : "MISSING") +
                    (mismatched.empty() ? "" : "; mismatched:" + mismatched)};
}

// ---------------------------------------------------------------------------

Verdict corpus_rules() {
  std::size_t ok = 0, total = 0;
  auto record = [](DatasetKind kind, std::size_t len, std::size_t i) {
    CorpusRecord r;
    r.user_id = "u" + std::to_string(i);
    r.dataset_kind = kind;
    r.task = "task " + std::to_string(i);
    for (std::size_t k = 0; k < len; ++k) r.reference += "\xc3\xa9";  // two bytes, one scalar
    return r;
  };
  struct Case {
    DatasetKind kind;
    std::size_t len;
    bool keep;
  };
  const Case cases[] = {{DatasetKind::email, 63, false},  {DatasetKind::email, 64, true},
                        {DatasetKind::email, 128, true},  {DatasetKind::email, 1024, true},
                        {DatasetKind::email, 1025, false}, {DatasetKind::paper, 63, false},
                        {DatasetKind::paper, 64, false},  {DatasetKind::paper, 127, false},
                        {DatasetKind::paper, 128, true},  {DatasetKind::paper, 1024, true},
                        {DatasetKind::paper, 1025, false}};
  std::size_t i = 0;
  for (const auto& c : cases) {
    ++total;
    auto [kept, rejected] = filter_lamp({record(c.kind, c.len, i++)}, c.kind);
    ok += (kept.size() == 1) == c.keep && (rejected.size() == 1) != c.keep;
  }
  for (std::size_t n : {10, 11, 19, 20, 37, 100, 1000}) {
    ++total;
    std::vector<CorpusRecord> recs;
    for (std::size_t k = 0; k < n; ++k) recs.push_back(record(DatasetKind::email, 70, k));
    auto [train, val] = split_train_val(recs, 9 + n);
    std::set<std::string> ids;
    for (const auto& x : train) ids.insert(x.user_id);
    for (const auto& x : val) ids.insert(x.user_id);
    ok += train.size() == n * 9 / 10 && val.size() == n - n * 9 / 10 && ids.size() == n;
  }
  return {ok == total, fmt("%zu/%zu boundary and split checks", ok, total)};
}

// ---------------------------------------------------------------------------

Verdict trace_rendering() {
  std::size_t ok = 0, total = 0;
  auto check = [&](bool c) {
    ++total;
    ok += c;
  };
  check(weight_color(0.5) == Rgb{255, 255, 255});
  check(weight_color(0.5, true) == Rgb{255, 255, 255});
  check(weight_color(1.0) == Rgb{0, 0, 255});
  check(weight_color(0.0) == Rgb{255, 0, 0});
  check(weight_color(1.0, true) == Rgb{255, 0, 0});
  check(weight_color(0.0, true) == Rgb{0, 0, 255});
  auto loaded = read_trace(detail::read_file(data_path("golden/trace/sample.trace")));
  struct G {
    const char* file;
    TraceFormat format;
    bool swap;
  };
  for (auto [file, format, swap] : {G{"sample.html", TraceFormat::html, false}, G{"sample_swapped.html", TraceFormat::html, true},
                                    G{"sample.ansi", TraceFormat::ansi, false}, G{"sample_swapped.ansi", TraceFormat::ansi, true}}) {
    TraceRenderOptions o;
    o.swap_hues = swap;
    check(render_weight_trace(loaded.trace, loaded.tokens, format, o) ==
          detail::read_file(data_path(std::string("golden/trace/") + file)));
  }
  return {ok == total, fmt("%zu/%zu color and golden checks", ok, total)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"fusion-correctness", fusion_correctness},
      {"combmodel-gradient-check", comb_gradient_check},
      {"combmodel-learning", comb_learning},
      {"personalized-ordering", personalized_ordering},
      {"first-k-degeneracies", first_k_degeneracies},
      {"remote-equivalence", remote_equivalence},
      {"privacy-audit", privacy},
      {"metric-oracles", metric_oracles},
      {"template-goldens", template_goldens},
      {"corpus-filters-split", corpus_rules},
      {"trace-rendering", trace_rendering},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
