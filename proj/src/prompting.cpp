#include "cogen/prompting/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "cogen/error.hpp"
#include "json_util.hpp"

#ifndef COGEN_TEMPLATE_DIR
#define COGEN_TEMPLATE_DIR "templates"
#endif

namespace cogen {

namespace {

bool placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of a "{name}" placeholder starting at text[i], or 0.
std::size_t placeholder_at(std::string_view text, std::size_t i) {
  if (text[i] != '{') return 0;
  std::size_t j = i + 1;
  while (j < text.size() && placeholder_char(text[j])) ++j;
  if (j == i + 1 || j >= text.size() || text[j] != '}') return 0;
  return j - i + 1;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::string render_template(std::string_view text, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (auto len = placeholder_at(text, i)) {
      std::string name(text.substr(i + 1, len - 2));
      auto it = bindings.find(name);
      if (it == bindings.end()) throw TemplateError("unbound placeholder {" + name + "}");
      out += it->second;
      i += len;
    } else {
      out += text[i++];
    }
  }
  return out;
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i)
    if (auto len = placeholder_at(text, i)) {
      std::string name(text.substr(i + 1, len - 2));
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
      i += len - 1;
    }
  return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw LoadError("template directory '" + dir.string() + "' not found");
  TemplateSet set;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    auto text = detail::read_file(entry.path());
    if (!text.empty() && text.back() == '\n') text.pop_back();
    set.templates_.emplace(entry.path().stem().string(), std::move(text));
  }
  if (set.templates_.empty()) throw LoadError("template directory '" + dir.string() + "' holds no templates");
  return set;
}

std::filesystem::path TemplateSet::default_dir() {
  if (const char* env = std::getenv("COGEN_TEMPLATE_DIR"); env && *env) return env;
  return COGEN_TEMPLATE_DIR;
}

const TemplateSet& TemplateSet::defaults() {
  static const TemplateSet set = load(default_dir());
  return set;
}

const std::string& TemplateSet::text(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw TemplateError("unknown template '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

std::string TemplateSet::render(std::string_view id, const std::map<std::string, std::string>& bindings) const {
  try {
    return render_template(text(id), bindings);
  } catch (const TemplateError& e) {
    throw TemplateError("template '" + std::string(id) + "': " + e.what());
  }
}

std::string RenderedPrompt::joined() const { return system + "\n\n" + user; }

namespace {

std::string_view kind_suffix(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::context_aware: return "context_aware";
    case DatasetKind::email: return "email";
    case DatasetKind::paper: return "paper";
  }
  throw InvalidConfig("unknown dataset kind");
}

std::string_view context_system_id(DatasetKind kind) {
  return kind == DatasetKind::context_aware ? "system_context_aware" : "system_lamp";
}

std::map<std::string, std::string> context_bindings(const CorpusRecord& record, DatasetKind kind) {
  std::map<std::string, std::string> b;
  if (kind == DatasetKind::context_aware) {
    b["profile"] = record.profile;
    b["history"] = join(record.history, "\n");
  } else {
    b["examples"] = join(record.history, "\n\n");
  }
  return b;
}

}  // namespace

RenderedPrompt build_request_prompt(const CorpusRecord& record, bool with_context, DatasetKind kind,
                                    const TemplateSet& templates) {
  const std::string user_id =
      "user_" + std::string(kind_suffix(kind)) + (with_context ? "_with" : "_without");
  if (!with_context)
    return {templates.text("system_no_context"), templates.render(user_id, {{"task", record.task}})};
  auto b = context_bindings(record, kind);
  b["task"] = record.task;
  return {templates.text(context_system_id(kind)), templates.render(user_id, b)};
}

RenderedPrompt build_cloud_prompt(const CorpusRecord& record, const TemplateSet& templates) {
  const std::string user_id = "user_" + std::string(kind_suffix(record.dataset_kind)) + "_without";
  return {templates.text("system_no_context"), templates.render(user_id, {{"task", record.cloud_task()}})};
}

std::string build_sketch_prompt(std::string_view task, DatasetKind kind, const TemplateSet& templates) {
  if (trim(task).empty()) throw InvalidInput("sketch prompt needs a non-empty task");
  return templates.render("sketch_" + std::string(kind_suffix(kind)), {{"question", std::string(task)}});
}

namespace {

// Parses "N." at the start of s (after optional spaces). Returns the number
// and the offset just past the dot, or {0, 0}.
std::pair<unsigned long, std::size_t> leading_number(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  std::size_t start = i;
  unsigned long n = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) && i - start < 6) n = n * 10 + (s[i++] - '0');
  if (i == start || i >= s.size() || s[i] != '.') return {0, 0};
  if (i + 1 < s.size() && !std::isspace(static_cast<unsigned char>(s[i + 1]))) return {0, 0};
  return {n, i + 1};
}

std::vector<std::string> parse_lines(std::string_view text) {
  std::vector<std::string> points;
  bool open = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    auto [n, off] = leading_number(line);
    if (off) {
      points.push_back(trim(line.substr(off)));
      open = true;
    } else if (open && !trim(line).empty()) {
      points.back() += ' ' + trim(line);
    }
    if (end == text.size()) break;
  }
  return points;
}

std::vector<std::string> parse_inline(std::string_view text) {
  std::vector<std::string> points;
  auto [first, off] = leading_number(text);
  if (!off || first != 1) return points;
  std::size_t body = off;
  for (unsigned long next = 2;; ++next) {
    const std::string marker = " " + std::to_string(next) + ".";
    std::size_t found = std::string_view::npos;
    for (auto at = text.find(marker, body); at != std::string_view::npos; at = text.find(marker, at + 1)) {
      auto after = at + marker.size();
      if (after == text.size() || std::isspace(static_cast<unsigned char>(text[after]))) {
        found = at;
        break;
      }
    }
    if (found == std::string_view::npos) {
      points.push_back(trim(text.substr(body)));
      break;
    }
    points.push_back(trim(text.substr(body, found - body)));
    body = found + marker.size();
  }
  return points;
}

}  // namespace

SketchArtifact parse_sketch(std::string_view raw_text) {
  std::string text;
  text.reserve(raw_text.size());
  for (std::size_t i = 0; i < raw_text.size(); ++i) {
    if (raw_text[i] == '\\' && i + 1 < raw_text.size() && raw_text[i + 1] == 'n') {
      text += '\n';
      ++i;
    } else {
      text += raw_text[i];
    }
  }
  auto points = text.find('\n') != std::string::npos ? parse_lines(text) : parse_inline(text);
  points.erase(std::remove_if(points.begin(), points.end(), [](const std::string& p) { return p.empty(); }),
               points.end());
  if (points.empty()) throw ParseError("no numbered points in sketch", std::string(raw_text));
  return {"", std::move(points), std::string(raw_text)};
}

std::string format_sketch(const std::vector<std::string>& points) {
  std::string out;
  for (std::size_t i = 0; i < points.size(); ++i) out += std::to_string(i + 1) + ". " + points[i] + "\n";
  return out;
}

std::string_view to_string(FillConditioning conditioning) noexcept {
  return conditioning == FillConditioning::sketch ? "sketch" : "full_content";
}

FillConditioning parse_fill_conditioning(std::string_view text) {
  if (text == "sketch") return FillConditioning::sketch;
  if (text == "full_content" || text == "full-content") return FillConditioning::full_content;
  throw InvalidConfig("unknown conditioning '" + std::string(text) + "'");
}

RenderedPrompt build_fill_prompt(const CorpusRecord& record, FillConditioning conditioning,
                                 std::string_view conditioning_text, const TemplateSet& templates) {
  if (trim(conditioning_text).empty()) throw InvalidInput("fill prompt needs non-empty conditioning text");
  if (record.context().empty()) throw InvalidInput("fill prompt needs a record with context");
  auto b = context_bindings(record, record.dataset_kind);
  b["task"] = record.task;
  b["reference_header"] = conditioning == FillConditioning::sketch ? "Reference Sketch" : "Reference Content";
  b["reference"] = std::string(conditioning_text);
  return {templates.text(context_system_id(record.dataset_kind)),
          templates.render("fill_" + std::string(kind_suffix(record.dataset_kind)), b)};
}

RenderedPrompt build_fill_prompt(const CorpusRecord& record, const SketchArtifact& sketch,
                                 const TemplateSet& templates) {
  auto text = format_sketch(sketch.points);
  if (!text.empty()) text.pop_back();
  return build_fill_prompt(record, FillConditioning::sketch, text, templates);
}

std::string_view to_string(JudgeKind kind) noexcept {
  switch (kind) {
    case JudgeKind::overall_with_profile: return "overall_with_profile";
    case JudgeKind::overall_no_profile: return "overall_no_profile";
    case JudgeKind::personalization: return "personalization";
  }
  return "overall_with_profile";
}

JudgeKind parse_judge_kind(std::string_view text) {
  if (text == "overall_with_profile") return JudgeKind::overall_with_profile;
  if (text == "overall_no_profile") return JudgeKind::overall_no_profile;
  if (text == "personalization") return JudgeKind::personalization;
  throw InvalidConfig("unknown judge kind '" + std::string(text) + "'");
}

std::string build_judge_prompt(JudgeKind kind, const CorpusRecord& record, std::string_view answer,
                               const TemplateSet& templates) {
  if (trim(answer).empty()) throw InvalidInput("judge prompt needs a non-empty answer");
  std::map<std::string, std::string> b{{"question", record.task}, {"answer", std::string(answer)}};
  if (kind != JudgeKind::overall_no_profile) {
    b["profile_info"] = record.profile;
    b["writing_history"] = join(record.history, "\n");
  }
  return templates.render("judge_" + std::string(to_string(kind)), b);
}

int parse_rating(std::string_view text) {
  auto parse_at = [&](std::size_t open) -> int {
    auto close = text.find("]]", open + 2);
    if (close == std::string_view::npos) throw ParseError("unterminated rating", std::string(text));
    auto inner = trim(text.substr(open + 2, close - open - 2));
    if (inner.empty() || inner.size() > 3 ||
        !std::all_of(inner.begin(), inner.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw ParseError("rating is not an integer: '" + inner + "'", std::string(text));
    int value = std::stoi(inner);
    if (value < 1 || value > 10) throw ParseError("rating out of range: " + inner, std::string(text));
    return value;
  };
  if (auto at = text.find("Rating: [["); at != std::string_view::npos) return parse_at(at + 8);
  if (auto at = text.find("[["); at != std::string_view::npos) return parse_at(at);
  throw ParseError("no rating found", std::string(text));
}

}  // namespace cogen
