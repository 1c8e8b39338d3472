#include "cogen/decoder/decoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "cogen/core/rng.hpp"

namespace cogen {

namespace {

FusionStrategy parse_strategy(std::string_view text) {
  if (text == "mean") return FusionStrategy::mean();
  if (text == "max") return FusionStrategy::max();
  if (text == "learnable") return FusionStrategy::learnable();
  if (text.starts_with("learnable(") && text.ends_with(")"))
    return FusionStrategy::learnable(std::string(text.substr(10, text.size() - 11)));
  std::string_view number;
  if (text.starts_with("fixed(") && text.ends_with(")"))
    number = text.substr(6, text.size() - 7);
  else if (text.starts_with("fixed:"))
    number = text.substr(6);
  else
    throw InvalidConfig("unknown fusion strategy '" + std::string(text) + "'");
  std::string s(number);
  char* end = nullptr;
  double w = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw InvalidConfig("bad fixed weight '" + s + "'");
  return FusionStrategy::fixed(w);
}

}  // namespace

void DecodeMode::validate() const {
  if (uses_fusion()) strategy.validate();
}

std::string DecodeMode::describe() const {
  switch (kind) {
    case Kind::slm_only: return "slm_only";
    case Kind::llm_only_with_context: return "llm_only_with_context";
    case Kind::llm_only_no_context: return "llm_only_no_context";
    case Kind::logit_fusion: return "fusion:" + strategy.describe();
    case Kind::first_k: return "first_k:" + std::to_string(n) + ":" + strategy.describe();
    case Kind::sketch_then_fill: return "sketch_then_fill:" + std::string(to_string(conditioning));
  }
  return "unknown";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "slm_only" || text == "slm") return DecodeMode::slm_only();
  if (text == "llm_only_with_context" || text == "llm-ctx") return DecodeMode::llm_only_with_context();
  if (text == "llm_only_no_context" || text == "llm-noctx") return DecodeMode::llm_only_no_context();
  if (text == "sketch" || text == "sketch_then_fill") return DecodeMode::sketch_then_fill(FillConditioning::sketch);
  if (text.starts_with("sketch_then_fill:"))
    return DecodeMode::sketch_then_fill(parse_fill_conditioning(text.substr(17)));
  if (text.starts_with("fusion:")) return DecodeMode::logit_fusion(parse_strategy(text.substr(7)));
  if (text == "fusion") return DecodeMode::logit_fusion(FusionStrategy::mean());
  if (text.starts_with("first_k:")) {
    auto rest = text.substr(8);
    auto colon = rest.find(':');
    std::string number(rest.substr(0, colon));
    char* end = nullptr;
    auto n = std::strtoull(number.c_str(), &end, 10);
    if (number.empty() || end != number.c_str() + number.size() || number.front() == '-')
      throw InvalidConfig("first_k needs a non-negative integer, got '" + number + "'");
    auto strategy = colon == std::string_view::npos ? FusionStrategy::mean() : parse_strategy(rest.substr(colon + 1));
    return DecodeMode::first_k(static_cast<std::size_t>(n), strategy);
  }
  throw InvalidConfig("unknown decode mode '" + std::string(text) + "'");
}

FailurePolicy parse_failure_policy(std::string_view text) {
  if (text == "abort") return FailurePolicy::abort;
  if (text == "degrade") return FailurePolicy::degrade;
  throw InvalidConfig("unknown failure policy '" + std::string(text) + "'");
}

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += s[i];
    }
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  std::string str(s);
  char* end = nullptr;
  double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) throw ParseError("bad number '" + str + "' in trace", str);
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::string str(s);
  char* end = nullptr;
  auto v = std::strtoull(str.c_str(), &end, 10);
  if (str.empty() || end != str.c_str() + str.size() || str.front() == '-')
    throw ParseError("bad integer '" + str + "' in trace", str);
  return v;
}

}  // namespace

std::string write_trace(const WeightTrace& trace, const Vocab& vocab) {
  std::string out = "# cogen-trace v1 mode=" + trace.mode + " seed=" + std::to_string(trace.seed) + "\n";
  char buf[128];
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& s = trace.steps[k];
    out += std::to_string(k) + "\t" + std::to_string(s.token_id) + "\t" + escape_field(vocab.token(s.token_id));
    std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\t%.17g\n", s.w_used, s.p_s_top1, s.p_l_top1);
    out += buf;
  }
  for (const auto& e : trace.events)
    out += "#event\t" + std::to_string(e.step) + "\t" + escape_field(e.message) + "\n";
  return out;
}

LoadedTrace read_trace(std::string_view text) {
  LoadedTrace loaded;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return ParseError("trace line " + std::to_string(line_no) + ": " + why, std::string(line));
    };
    if (!header) {
      constexpr std::string_view kHead = "# cogen-trace v1 mode=";
      auto seed_at = line.rfind(" seed=");
      if (!line.starts_with(kHead) || seed_at == std::string_view::npos || seed_at < kHead.size())
        throw fail("missing '# cogen-trace v1' header");
      loaded.trace.mode = std::string(line.substr(kHead.size(), seed_at - kHead.size()));
      loaded.trace.seed = parse_u64(line.substr(seed_at + 6));
      header = true;
      continue;
    }
    auto fields = split_tabs(line);
    if (fields[0] == "#event") {
      if (fields.size() != 3) throw fail("event needs step and message");
      loaded.trace.events.push_back({static_cast<std::size_t>(parse_u64(fields[1])), unescape_field(fields[2])});
      continue;
    }
    if (line.starts_with("#")) continue;
    if (fields.size() != 6) throw fail("expected 6 tab-separated fields");
    if (parse_u64(fields[0]) != loaded.trace.steps.size()) throw fail("step indices must be consecutive from 0");
    TraceStep step;
    step.token_id = static_cast<TokenId>(parse_u64(fields[1]));
    step.w_used = parse_double(fields[3]);
    step.p_s_top1 = parse_double(fields[4]);
    step.p_l_top1 = parse_double(fields[5]);
    if (!(step.w_used >= 0.0 && step.w_used <= 1.0)) throw fail("w outside [0, 1]");
    loaded.trace.steps.push_back(step);
    loaded.tokens.push_back(unescape_field(fields[2]));
  }
  if (!header) throw ParseError("empty trace", std::string(text));
  return loaded;
}

std::string slm_instruction(const CorpusRecord& record, const TemplateSet& templates) {
  return build_request_prompt(record, true, record.dataset_kind, templates).joined();
}

std::string llm_instruction(const CorpusRecord& record, const TemplateSet& templates) {
  return build_cloud_prompt(record, templates).joined();
}

namespace {

const TemplateSet& templates_or_default(const TemplateSet* t) { return t ? *t : TemplateSet::defaults(); }

TokenDistribution slm_distribution(const LanguageModel& slm, const std::string& instruction,
                                   const ContextBundle& context, const std::vector<TokenId>& prefix) {
  return slm.next_distribution(ConditioningInput::for_role(Role::small_device, instruction, context, prefix));
}

// Weight and fused distribution for one step.
FusionResult fuse_step(const TokenDistribution& p_s, const TokenDistribution& p_l, const FusionStrategy& strategy,
                       const CombModelParams* comb, CombFeatures features) {
  auto pair = align_supports(p_s, p_l);
  if (strategy.kind != FusionStrategy::Kind::learnable) return fuse(pair, strategy);
  if (!comb) throw InvalidConfig("learnable fusion needs a CombModel");
  auto x = comb_features(p_l, p_s, features);
  std::span<const double> xs(x);
  double w = comb_forward(*comb, xs.subspan(0, kCombTopK), xs.subspan(kCombTopK, kCombTopK));
  return fuse(pair, strategy, w);
}

void check_vocab(const LanguageModel& slm, const CloudModel& llm) {
  if (slm.vocab().hash() != llm.vocab_hash())
    throw IncompatibleVocab("small and large backends use different vocabularies");
}

// SLM-only decoding of a response from a given instruction; shared by the
// fill step of sketch_then_fill.
void slm_decode(const LanguageModel& slm, const std::string& instruction, const ContextBundle& context,
                const SamplingConfig& sampling, Rng& rng, DecodeResult& result) {
  const auto eos = slm.vocab().eos_id();
  for (std::uint32_t k = 0; k < sampling.max_new_tokens; ++k) {
    auto p_s = slm_distribution(slm, instruction, context, result.tokens);
    auto token = sample_top_p(p_s, sampling, rng);
    result.tokens.push_back(token);
    result.trace.steps.push_back({token, 1.0, p_s.max_prob(), 0.0});
    if (token == eos) break;
  }
}

}  // namespace

std::vector<TokenId> decode_single(const LanguageModel& backend, const ConditioningInput& input,
                                   const SamplingConfig& sampling) {
  sampling.validate();
  Rng rng(sampling.seed);
  std::vector<TokenId> out;
  const auto eos = backend.vocab().eos_id();
  for (std::uint32_t k = 0; k < sampling.max_new_tokens; ++k) {
    auto dist = backend.next_distribution(input.with_prefix(out));
    auto token = sample_top_p(dist, sampling, rng);
    out.push_back(token);
    if (token == eos) break;
  }
  return out;
}

DecodeResult run_sketch_then_fill(CloudModel& llm, const LanguageModel& slm, const CorpusRecord& record,
                                  const SamplingConfig& sampling, FillConditioning conditioning,
                                  const TemplateSet& templates, const DecodeOptions& options) {
  sampling.validate();
  check_vocab(slm, llm);
  DecodeResult result;
  result.trace.mode = "sketch_then_fill:" + std::string(to_string(conditioning));
  result.trace.seed = sampling.seed;

  const auto cloud_prompt = conditioning == FillConditioning::sketch
                                ? build_sketch_prompt(record.cloud_task(), record.dataset_kind, templates)
                                : llm_instruction(record, templates);
  std::string fill;
  for (unsigned attempt = 0;; ++attempt) {
    auto attempt_sampling = sampling;
    attempt_sampling.seed = sampling.seed + attempt;
    std::vector<TokenId> draft;
    try {
      draft = llm.generate(cloud_prompt, attempt_sampling);
    } catch (const TransportError& e) {
      throw SessionError(std::string("sketch request failed: ") + e.what(), result.trace, true);
    }
    result.draft_text = slm.vocab().decode(draft);
    if (conditioning == FillConditioning::full_content) {
      if (result.draft_text.empty()) throw ParseError("cloud draft is empty", result.draft_text);
      fill = build_fill_prompt(record, conditioning, result.draft_text, templates).joined();
      break;
    }
    try {
      auto sketch = parse_sketch(result.draft_text);
      sketch.source_backend = "cloud";
      fill = build_fill_prompt(record, sketch, templates).joined();
      result.trace.events.push_back({0, "sketch with " + std::to_string(sketch.points.size()) + " points"});
      result.sketch = std::move(sketch);
      break;
    } catch (const ParseError&) {
      if (attempt >= options.sketch_retries) throw;
      result.trace.events.push_back({0, "sketch unparseable, retrying"});
    }
  }
  Rng rng(sampling.seed);
  slm_decode(slm, fill, record.context(), sampling, rng, result);
  return result;
}

DecodeResult decode(const GenerationSession& s) {
  if (!s.record || !s.slm) throw InvalidConfig("session needs a record and a small backend");
  s.mode.validate();
  s.sampling.validate();
  s.record->validate();
  const auto& templates = templates_or_default(s.templates);
  using Kind = DecodeMode::Kind;
  const bool needs_cloud = s.mode.uses_fusion() || s.mode.kind == Kind::llm_only_no_context ||
                           s.mode.kind == Kind::sketch_then_fill;
  if (needs_cloud) {
    if (!s.llm) throw InvalidConfig("mode " + s.mode.describe() + " needs a cloud backend");
    check_vocab(*s.slm, *s.llm);
  }
  if (s.mode.uses_fusion() && s.mode.strategy.kind == FusionStrategy::Kind::learnable && !s.comb)
    throw InvalidConfig("learnable fusion needs a CombModel");

  if (s.mode.kind == Kind::sketch_then_fill)
    return run_sketch_then_fill(*s.llm, *s.slm, *s.record, s.sampling, s.mode.conditioning, templates, s.options);

  const LanguageModel* private_llm = nullptr;
  if (s.mode.kind == Kind::llm_only_with_context) {
    if (!s.llm_with_context) throw InvalidConfig("llm_only_with_context needs a local copy of the large model");
    if (s.llm_with_context->role() != Role::small_device)
      throw PrivacyViolation("llm_only_with_context must run on a backend with role small_device");
    if (s.llm_with_context->vocab().hash() != s.slm->vocab().hash())
      throw IncompatibleVocab("local large model uses a different vocabulary");
    private_llm = s.llm_with_context;
  }

  DecodeResult result;
  result.trace.mode = s.mode.describe();
  result.trace.seed = s.sampling.seed;
  const auto context = s.record->context();
  const auto slm_instr = slm_instruction(*s.record, templates);
  const auto llm_instr = needs_cloud ? llm_instruction(*s.record, templates) : std::string();
  const auto eos = s.slm->vocab().eos_id();
  Rng rng(s.sampling.seed);
  bool degraded = false;

  for (std::uint32_t k = 0; k < s.sampling.max_new_tokens; ++k) {
    TokenId token;
    TraceStep step;
    if (s.mode.kind == Kind::llm_only_no_context) {
      TokenDistribution p_l = TokenDistribution::uniform(1);
      try {
        p_l = renormalized(s.llm->next_logits(llm_instr, result.tokens, s.llm->vocab_size()));
      } catch (const Error& e) {
        throw SessionError(std::string("cloud request failed: ") + e.what(), result.trace,
                           dynamic_cast<const TransportError*>(&e) != nullptr);
      }
      token = sample_top_p(p_l, s.sampling, rng);
      step = {token, 0.0, 0.0, p_l.max_prob()};
    } else if (private_llm) {
      auto p = renormalized(slm_distribution(*private_llm, slm_instr, context, result.tokens));
      token = sample_top_p(p, s.sampling, rng);
      step = {token, 0.0, 0.0, p.max_prob()};
    } else {
      auto p_s = slm_distribution(*s.slm, slm_instr, context, result.tokens);
      const bool fused = !degraded && (s.mode.kind == Kind::logit_fusion || (s.mode.kind == Kind::first_k && k < s.mode.n));
      std::optional<TokenDistribution> p_l;
      if (fused) {
        try {
          p_l = s.llm->next_logits(llm_instr, result.tokens, s.options.llm_top_k);
        } catch (const TransportError& e) {
          if (s.options.on_failure == FailurePolicy::abort)
            throw SessionError(std::string("cloud request failed: ") + e.what(), result.trace, true);
          degraded = true;
          result.trace.events.push_back({k, std::string("cloud unavailable, continuing with slm_only: ") + e.what()});
        } catch (const Error& e) {
          throw SessionError(std::string("cloud request failed: ") + e.what(), result.trace, false);
        }
      }
      if (p_l) {
        auto fr = fuse_step(p_s, *p_l, s.mode.strategy, s.comb, s.options.features);
        token = sample_top_p(fr.dist, s.sampling, rng);
        step = {token, fr.w_used, p_s.max_prob(), p_l->max_prob()};
      } else {
        token = sample_top_p(p_s, s.sampling, rng);
        step = {token, 1.0, p_s.max_prob(), 0.0};
      }
    }
    result.tokens.push_back(token);
    result.trace.steps.push_back(step);
    if (token == eos) break;
  }
  return result;
}

namespace {

struct Teacher {
  std::vector<TokenId> target;
  std::string slm_instr;
  std::string llm_instr;
  ContextBundle context;
};

Teacher teacher(const ScoreInputs& in, bool needs_cloud) {
  if (!in.record || !in.slm) throw InvalidConfig("scoring needs a record and a small backend");
  if (needs_cloud) {
    if (!in.llm) throw InvalidConfig("scoring needs a cloud backend");
    check_vocab(*in.slm, *in.llm);
  }
  const auto& templates = templates_or_default(in.templates);
  Teacher t;
  t.target = in.slm->vocab().encode(in.record->reference);
  t.target.push_back(in.slm->vocab().eos_id());
  t.slm_instr = slm_instruction(*in.record, templates);
  if (needs_cloud) t.llm_instr = llm_instruction(*in.record, templates);
  t.context = in.record->context();
  return t;
}

double nll(double p) { return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity(); }

}  // namespace

std::vector<double> reference_nll(const ScoreInputs& in, const FusionStrategy& strategy, std::size_t fused_steps) {
  strategy.validate();
  auto t = teacher(in, fused_steps > 0);
  std::vector<double> out;
  std::vector<TokenId> prefix;
  for (std::size_t k = 0; k < t.target.size(); ++k) {
    auto p_s = slm_distribution(*in.slm, t.slm_instr, t.context, prefix);
    if (k < fused_steps) {
      auto p_l = in.llm->next_logits(t.llm_instr, prefix, in.options.llm_top_k);
      out.push_back(nll(fuse_step(p_s, p_l, strategy, in.comb, in.options.features).dist.prob(t.target[k])));
    } else {
      out.push_back(nll(p_s.prob(t.target[k])));
    }
    prefix.push_back(t.target[k]);
  }
  return out;
}

std::vector<double> reference_nll_slm(const ScoreInputs& in) {
  auto t = teacher(in, false);
  std::vector<double> out;
  std::vector<TokenId> prefix;
  for (auto y : t.target) {
    out.push_back(nll(renormalized(slm_distribution(*in.slm, t.slm_instr, t.context, prefix)).prob(y)));
    prefix.push_back(y);
  }
  return out;
}

std::vector<double> reference_nll_llm(const ScoreInputs& in) {
  auto t = teacher(in, true);
  std::vector<double> out;
  std::vector<TokenId> prefix;
  for (auto y : t.target) {
    out.push_back(nll(renormalized(in.llm->next_logits(t.llm_instr, prefix, in.llm->vocab_size())).prob(y)));
    prefix.push_back(y);
  }
  return out;
}

std::vector<CombExample> comb_examples(const ScoreInputs& in) {
  auto t = teacher(in, true);
  std::vector<CombExample> out;
  std::vector<TokenId> prefix;
  for (auto y : t.target) {
    auto p_s = slm_distribution(*in.slm, t.slm_instr, t.context, prefix);
    auto p_l = in.llm->next_logits(t.llm_instr, prefix, in.options.llm_top_k);
    if (auto ex = make_comb_example(p_s, p_l, y, in.options.features)) out.push_back(std::move(*ex));
    prefix.push_back(y);
  }
  return out;
}

}  // namespace cogen
