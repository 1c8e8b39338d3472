#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/corpus/corpus.hpp"

namespace cogen {

/// Prompt templates loaded from a directory of "<id>.txt" files. One trailing
/// newline is stripped from each file; placeholders are "{name}" with name
/// made of lowercase letters and underscores.
class TemplateSet {
 public:
  static TemplateSet load(const std::filesystem::path& dir);
  // The templates/ directory shipped with the sources.
  static const TemplateSet& defaults();
  static std::filesystem::path default_dir();

  const std::string& text(std::string_view id) const;
  bool contains(std::string_view id) const { return templates_.count(std::string(id)) > 0; }
  std::vector<std::string> ids() const;

  // Single-pass substitution: substituted values are never rescanned. An
  // unbound placeholder raises TemplateError naming it.
  std::string render(std::string_view id, const std::map<std::string, std::string>& bindings) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string render_template(std::string_view text, const std::map<std::string, std::string>& bindings);
std::vector<std::string> placeholders(std::string_view text);

struct RenderedPrompt {
  std::string system;
  std::string user;

  // System text, blank line, user text.
  std::string joined() const;
  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

RenderedPrompt build_request_prompt(const CorpusRecord& record, bool with_context, DatasetKind kind,
                                    const TemplateSet& templates = TemplateSet::defaults());
// The context-free render sent upstream: uses general_task when present.
RenderedPrompt build_cloud_prompt(const CorpusRecord& record, const TemplateSet& templates = TemplateSet::defaults());

std::string build_sketch_prompt(std::string_view task, DatasetKind kind,
                                const TemplateSet& templates = TemplateSet::defaults());

struct SketchArtifact {
  std::string source_backend;
  std::vector<std::string> points;
  std::string raw_text;

  friend bool operator==(const SketchArtifact&, const SketchArtifact&) = default;
};

// Numbered points "1. ...", separated by newlines or by literal "\n"
// sequences; a single line is scanned for consecutive " N." markers.
SketchArtifact parse_sketch(std::string_view raw_text);
std::string format_sketch(const std::vector<std::string>& points);

enum class FillConditioning { sketch, full_content };

std::string_view to_string(FillConditioning conditioning) noexcept;
FillConditioning parse_fill_conditioning(std::string_view text);

// With-context layout plus a "## Reference Sketch" (or "## Reference
// Content") section placed between the history and the task.
RenderedPrompt build_fill_prompt(const CorpusRecord& record, FillConditioning conditioning,
                                 std::string_view conditioning_text,
                                 const TemplateSet& templates = TemplateSet::defaults());
RenderedPrompt build_fill_prompt(const CorpusRecord& record, const SketchArtifact& sketch,
                                 const TemplateSet& templates = TemplateSet::defaults());

enum class JudgeKind { overall_with_profile, overall_no_profile, personalization };

std::string_view to_string(JudgeKind kind) noexcept;
JudgeKind parse_judge_kind(std::string_view text);

std::string build_judge_prompt(JudgeKind kind, const CorpusRecord& record, std::string_view answer,
                               const TemplateSet& templates = TemplateSet::defaults());
// Reads "Rating: [[N]]" (also a bare "[[N]]") with N in 1..10.
int parse_rating(std::string_view text);

}  // namespace cogen
