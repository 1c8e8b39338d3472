#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/backends/backend.hpp"
#include "cogen/combmodel/comb_model.hpp"
#include "cogen/core/sampling.hpp"
#include "cogen/corpus/corpus.hpp"
#include "cogen/decoder/cloud_model.hpp"
#include "cogen/error.hpp"
#include "cogen/fusion/fusion.hpp"
#include "cogen/prompting/prompting.hpp"

namespace cogen {

struct DecodeMode {
  enum class Kind { slm_only, llm_only_with_context, llm_only_no_context, logit_fusion, first_k, sketch_then_fill };

  Kind kind = Kind::logit_fusion;
  FusionStrategy strategy = FusionStrategy::mean();
  std::size_t n = 0;  // first_k only
  FillConditioning conditioning = FillConditioning::sketch;

  static DecodeMode slm_only() { return {Kind::slm_only}; }
  static DecodeMode llm_only_with_context() { return {Kind::llm_only_with_context}; }
  static DecodeMode llm_only_no_context() { return {Kind::llm_only_no_context}; }
  static DecodeMode logit_fusion(FusionStrategy s) { return {Kind::logit_fusion, std::move(s)}; }
  static DecodeMode first_k(std::size_t n, FusionStrategy s) { return {Kind::first_k, std::move(s), n}; }
  static DecodeMode sketch_then_fill(FillConditioning c) {
    return {Kind::sketch_then_fill, FusionStrategy::mean(), 0, c};
  }

  bool uses_fusion() const noexcept { return kind == Kind::logit_fusion || kind == Kind::first_k; }
  void validate() const;
  // Stable label such as "fusion:mean" or "first_k:8:max".
  std::string describe() const;
};

DecodeMode parse_decode_mode(std::string_view text);

struct TraceStep {
  TokenId token_id = 0;
  double w_used = 1.0;
  double p_s_top1 = 0.0;
  double p_l_top1 = 0.0;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct TraceEvent {
  std::size_t step = 0;  // index of the first step the event applies to
  std::string message;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// One entry per emitted token, including a final EOS.
struct WeightTrace {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<TraceStep> steps;
  std::vector<TraceEvent> events;

  friend bool operator==(const WeightTrace&, const WeightTrace&) = default;
};

// "# cogen-trace v1 mode=<mode> seed=<seed>", then per step
// "step\tid\ttoken\tw\tp_s_top1\tp_l_top1" with tokens escaped (\\ \t \n)
// and doubles printed with %.17g; events as "#event\tstep\tmessage".
std::string write_trace(const WeightTrace& trace, const Vocab& vocab);

struct LoadedTrace {
  WeightTrace trace;
  std::vector<std::string> tokens;  // surface strings, one per step
};
LoadedTrace read_trace(std::string_view text);

enum class FailurePolicy { abort, degrade };

FailurePolicy parse_failure_policy(std::string_view text);

struct DecodeOptions {
  std::size_t llm_top_k = 10;
  CombFeatures features = CombFeatures::probabilities;
  FailurePolicy on_failure = FailurePolicy::abort;
  unsigned sketch_retries = 1;
};

/// Everything one generation needs. Backends are borrowed and must outlive
/// the session; they are never mutated apart from the cloud transport.
struct GenerationSession {
  const CorpusRecord* record = nullptr;
  DecodeMode mode;
  SamplingConfig sampling;
  const LanguageModel* slm = nullptr;
  CloudModel* llm = nullptr;
  const CombModelParams* comb = nullptr;  // learnable strategies
  // A private copy of the large model with role small_device, for the
  // llm_only_with_context upper bound. A remote model cannot take context.
  const LanguageModel* llm_with_context = nullptr;
  const TemplateSet* templates = nullptr;  // defaults when null
  DecodeOptions options;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  WeightTrace trace;
  std::optional<SketchArtifact> sketch;
  std::string draft_text;  // LLM output in sketch_then_fill
};

/// A backend failed mid-stream. Carries what was generated so far.
class SessionError : public Error {
 public:
  SessionError(const std::string& what, WeightTrace partial, bool transport)
      : Error(what), partial_(std::move(partial)), transport_(transport) {}
  const WeightTrace& partial_trace() const noexcept { return partial_; }
  bool transport() const noexcept { return transport_; }

 private:
  WeightTrace partial_;
  bool transport_;
};

DecodeResult decode(const GenerationSession& session);

// Ancestral sampling against one backend; the server side of "generate".
std::vector<TokenId> decode_single(const LanguageModel& backend, const ConditioningInput& input,
                                   const SamplingConfig& sampling);

// Sketch from the cloud on the general instruction, then the SLM writes the
// response from the fill prompt with context.
DecodeResult run_sketch_then_fill(CloudModel& llm, const LanguageModel& slm, const CorpusRecord& record,
                                  const SamplingConfig& sampling, FillConditioning conditioning,
                                  const TemplateSet& templates = TemplateSet::defaults(),
                                  const DecodeOptions& options = {});

// Teacher-forced scoring of a reference under a fusion mode: per-token
// negative log-likelihoods of the reference followed by EOS. Steps before
// `fused_steps` use p_c, later steps p_s alone.
struct ScoreInputs {
  const CorpusRecord* record = nullptr;
  const LanguageModel* slm = nullptr;
  CloudModel* llm = nullptr;
  const CombModelParams* comb = nullptr;
  const TemplateSet* templates = nullptr;
  DecodeOptions options;
};

std::vector<double> reference_nll(const ScoreInputs& inputs, const FusionStrategy& strategy,
                                  std::size_t fused_steps = static_cast<std::size_t>(-1));
// Per-token NLL of the reference under a single model: SLM with context, or
// the cloud model over its full vocabulary without context.
std::vector<double> reference_nll_slm(const ScoreInputs& inputs);
std::vector<double> reference_nll_llm(const ScoreInputs& inputs);

// Training examples for the CombModel from teacher-forced references.
std::vector<CombExample> comb_examples(const ScoreInputs& inputs);

// The instruction strings each side receives for a record.
std::string slm_instruction(const CorpusRecord& record, const TemplateSet& templates);
std::string llm_instruction(const CorpusRecord& record, const TemplateSet& templates);

}  // namespace cogen
