#include "cogen/report/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "cogen/error.hpp"

namespace cogen {

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngram_counts(const Tokens& tokens, unsigned n) {
  NGramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

double bleu(const Tokens& candidate, const std::vector<Tokens>& references, unsigned max_n) {
  if (max_n < 1) throw InvalidInput("bleu needs max_n >= 1");
  if (references.empty()) throw InvalidInput("bleu needs at least one reference");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (unsigned n = 1; n <= max_n; ++n) {
    const std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    if (total == 0) continue;  // precision 1
    auto cand = ngram_counts(candidate, n);
    std::vector<NGramCounts> refs;
    for (const auto& r : references) refs.push_back(ngram_counts(r, n));
    std::size_t matched = 0;
    for (const auto& [gram, count] : cand) {
      std::size_t best = 0;
      for (const auto& r : refs)
        if (auto it = r.find(gram); it != r.end()) best = std::max(best, it->second);
      matched += std::min(count, best);
    }
    double p;
    if (matched == 0) {
      if (n == 1) return 0.0;
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  const auto c = candidate.size();
  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    auto d_new = ref.size() > c ? ref.size() - c : c - ref.size();
    auto d_old = r > c ? r - c : c - r;
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeL rouge_l(const Tokens& candidate, const Tokens& reference) {
  RougeL out;
  const auto l = lcs_length(candidate, reference);
  if (l == 0) return out;
  out.p = static_cast<double>(l) / static_cast<double>(candidate.size());
  out.r = static_cast<double>(l) / static_cast<double>(reference.size());
  out.f = 2.0 * out.p * out.r / (out.p + out.r);
  return out;
}

MetricScore score_text(std::string_view candidate, std::string_view reference, TokenizerPolicy policy) {
  auto c = split_tokens(candidate, policy);
  auto r = split_tokens(reference, policy);
  auto rl = rouge_l(c, r);
  return {bleu(c, {r}), rl.p, rl.r, rl.f};
}

namespace {

std::vector<std::string_view> split_tab(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) return out;
    pos = tab + 1;
  }
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    f(line, line_no);
  }
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

Aggregate aggregate_scores(std::string_view score_file) {
  Aggregate agg;
  std::map<std::pair<std::string, std::string>, double> sums;
  for_each_line(score_file, [&](std::string_view line, std::size_t line_no) {
    auto f = split_tab(line);
    if (f.size() != 4)
      throw InvalidInput("score line " + std::to_string(line_no) + ": expected setting, metric, item_id, rating");
    std::string metric(f[1]);
    if (std::find(std::begin(kMetricIds), std::end(kMetricIds), metric) == std::end(kMetricIds))
      throw InvalidInput("score line " + std::to_string(line_no) + ": unknown metric '" + metric + "'");
    std::string rating_text(f[3]);
    char* end = nullptr;
    long rating = std::strtol(rating_text.c_str(), &end, 10);
    if (rating_text.empty() || end != rating_text.c_str() + rating_text.size() || rating < 1 || rating > 10) {
      ++agg.rejected;
      return;
    }
    std::string setting(f[0]);
    if (std::find(agg.settings.begin(), agg.settings.end(), setting) == agg.settings.end())
      agg.settings.push_back(setting);
    auto key = std::make_pair(setting, metric);
    sums[key] += static_cast<double>(rating);
    auto n = ++agg.counts[key];
    agg.running[key].push_back(sums[key] / static_cast<double>(n));
  });
  for (const auto& [key, sum] : sums) agg.means[key] = sum / static_cast<double>(agg.counts[key]);
  return agg;
}

std::string render_score_grid(const Aggregate& agg) {
  const std::string headers[] = {"Ovl.(w)", "Per.", "Ovl.(w/o)"};
  std::size_t width = 6;
  for (const auto& s : agg.settings) width = std::max(width, s.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string out = pad("Models", width + 2);
  for (const auto& h : headers) out += pad(h, 11);
  while (out.back() == ' ') out.pop_back();
  out += "\n";
  for (const auto& s : agg.settings) {
    std::string line = pad(s, width + 2);
    for (auto metric : kMetricIds) {
      auto it = agg.means.find({s, std::string(metric)});
      line += pad(it == agg.means.end() ? "-" : fixed2(it->second), 11);
    }
    while (line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string render_stability_curve(const Aggregate& agg) {
  std::string out;
  for (const auto& s : agg.settings)
    for (auto metric : kMetricIds) {
      auto it = agg.running.find({s, std::string(metric)});
      if (it == agg.running.end()) continue;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "\t%zu\t%.6f\n", i + 1, it->second[i]);
        out += s + "\t" + std::string(metric) + buf;
      }
    }
  return out;
}

Outcome parse_outcome(std::string_view text) {
  if (text == "win") return Outcome::win;
  if (text == "tie") return Outcome::tie;
  if (text == "lose") return Outcome::lose;
  throw InvalidInput("unknown outcome '" + std::string(text) + "'");
}

std::string WinTieLose::counts_cell() const {
  return std::to_string(win) + "/" + std::to_string(tie) + "/" + std::to_string(lose);
}

std::string WinTieLose::percent_cell() const {
  return fixed1(win_pct) + "/" + fixed1(tie_pct) + "/" + fixed1(lose_pct);
}

WinTieLose win_tie_lose(const std::vector<Outcome>& outcomes) {
  if (outcomes.empty()) throw InvalidInput("win/tie/lose needs at least one judgment");
  WinTieLose w;
  for (auto o : outcomes) {
    if (o == Outcome::win) ++w.win;
    else if (o == Outcome::tie) ++w.tie;
    else ++w.lose;
  }
  const double n = static_cast<double>(outcomes.size());
  w.win_pct = 100.0 * static_cast<double>(w.win) / n;
  w.tie_pct = 100.0 * static_cast<double>(w.tie) / n;
  w.lose_pct = 100.0 * static_cast<double>(w.lose) / n;
  return w;
}

std::string self_row_cell(std::size_t items) { return "-/" + std::to_string(items) + "/-"; }

std::vector<Outcome> parse_judgments(std::string_view text) {
  std::vector<Outcome> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto f = split_tab(line);
    if (f.size() != 2) throw InvalidInput("judgment line " + std::to_string(line_no) + ": expected item_id, outcome");
    try {
      out.push_back(parse_outcome(f[1]));
    } catch (const InvalidInput& e) {
      throw InvalidInput("judgment line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

TraceFormat parse_trace_format(std::string_view text) {
  if (text == "html") return TraceFormat::html;
  if (text == "ansi") return TraceFormat::ansi;
  throw InvalidConfig("unknown trace format '" + std::string(text) + "'");
}

Rgb weight_color(double w, bool swap_hues) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("weight outside [0, 1]");
  const double intensity = std::fabs(w - 0.5) * 2.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - intensity)));
  bool slm_side = w > 0.5;
  if (swap_hues) slm_side = !slm_side;
  if (w == 0.5) return {255, 255, 255};
  return slm_side ? Rgb{fade, fade, 255} : Rgb{255, fade, fade};
}

namespace {

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string ansi_bg(Rgb c) {
  return "\x1b[48;2;" + std::to_string(c.r) + ";" + std::to_string(c.g) + ";" + std::to_string(c.b) +
         "m\x1b[38;2;0;0;0m";
}

std::string weight_text(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", w);
  return buf;
}

}  // namespace

std::string render_weight_trace(const WeightTrace& trace, const std::vector<std::string>& tokens, TraceFormat format,
                                const TraceRenderOptions& options) {
  if (trace.steps.empty()) throw InvalidInput("cannot render an empty trace");
  if (tokens.size() != trace.steps.size()) throw InvalidInput("trace and token list differ in length");
  const Rgb slm = weight_color(1.0, options.swap_hues);
  const Rgb llm = weight_color(0.0, options.swap_hues);
  std::string out;
  if (format == TraceFormat::html) {
    out += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + html_escape(options.title) +
           "</title>\n<style>\nbody { font-family: sans-serif; }\n"
           ".trace span { padding: 1px 2px; }\n.legend span { display: inline-block; padding: 2px 8px; "
           "border: 1px solid #999; margin-right: 6px; }\n</style>\n</head>\n<body>\n";
    out += "<p class=\"meta\">mode " + html_escape(trace.mode) + ", seed " + std::to_string(trace.seed) + ", " +
           std::to_string(trace.steps.size()) + " tokens</p>\n";
    out += "<div class=\"legend\"><span style=\"background-color:" + hex_color(slm) +
           "\">SLM (w = 1)</span><span style=\"background-color:#ffffff\">balanced (w = 0.5)</span>"
           "<span style=\"background-color:" + hex_color(llm) + "\">LLM (w = 0)</span></div>\n";
    out += "<p class=\"trace\">";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += html_escape(options.separator);
      const double w = trace.steps[i].w_used;
      out += "<span style=\"background-color:" + hex_color(weight_color(w, options.swap_hues)) + "\" title=\"w=" +
             weight_text(w) + "\">" + html_escape(tokens[i]) + "</span>";
    }
    out += "</p>\n";
    for (const auto& e : trace.events)
      out += "<p class=\"event\">step " + std::to_string(e.step) + ": " + html_escape(e.message) + "</p>\n";
    out += "</body>\n</html>\n";
  } else {
    const std::string reset = "\x1b[0m";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += options.separator;
      out += ansi_bg(weight_color(trace.steps[i].w_used, options.swap_hues)) + tokens[i] + reset;
    }
    out += "\n";
    out += "legend: " + ansi_bg(slm) + " SLM (w = 1) " + reset + " " + ansi_bg({255, 255, 255}) +
           " balanced (w = 0.5) " + reset + " " + ansi_bg(llm) + " LLM (w = 0) " + reset + "\n";
    for (const auto& e : trace.events) out += "event at step " + std::to_string(e.step) + ": " + e.message + "\n";
  }
  return out;
}

}  // namespace cogen
