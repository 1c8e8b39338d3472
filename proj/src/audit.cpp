#include "cogen/service/audit.hpp"

#include <cctype>
#include <string_view>
#include <unordered_set>

#include "json_util.hpp"

namespace cogen {

std::string normalize_for_audit(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

namespace {

void collect_strings(const detail::json& j, std::string& out) {
  if (j.is_string()) {
    out += j.get_ref<const std::string&>();
    out += ' ';
  } else if (j.is_array() || j.is_object()) {
    for (const auto& item : j) collect_strings(item, out);
  }
}

std::string audit_text(const std::string& payload) {
  std::string text = payload;
  try {
    auto j = detail::json::parse(payload);
    std::string strings;
    collect_strings(j, strings);
    text += '\n';
    text += strings;
  } catch (const detail::json::exception&) {
  }
  return normalize_for_audit(text);
}

}  // namespace

AuditVerdict privacy_audit(const std::vector<std::string>& payloads, const ContextBundle& context,
                           std::size_t window) {
  if (window == 0) window = 1;
  std::vector<std::pair<std::string, std::string>> fields;
  if (!context.profile.empty()) fields.emplace_back("profile", normalize_for_audit(context.profile));
  for (std::size_t i = 0; i < context.history.size(); ++i)
    fields.emplace_back("history[" + std::to_string(i) + "]", normalize_for_audit(context.history[i]));

  std::vector<std::unordered_set<std::string_view>> grams(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const auto& s = fields[f].second;
    for (std::size_t i = 0; i + window <= s.size(); ++i) grams[f].insert(std::string_view(s).substr(i, window));
  }

  AuditVerdict verdict;
  verdict.requests_checked = payloads.size();
  for (std::size_t r = 0; r < payloads.size(); ++r) {
    const auto text = audit_text(payloads[r]);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (grams[f].empty()) continue;
      for (std::size_t i = 0; i + window <= text.size(); ++i) {
        auto w = std::string_view(text).substr(i, window);
        if (grams[f].count(w)) {
          verdict.findings.push_back({r, fields[f].first, i, std::string(w)});
          break;
        }
      }
    }
  }
  verdict.pass = verdict.findings.empty();
  return verdict;
}

}  // namespace cogen
