#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cogen/decoder/decoder.hpp"

namespace cogen {

using Tokens = std::vector<std::string>;

// Corpus BLEU of one candidate against one or more references: clipped
// n-gram precisions for n = 1..max_n, geometric mean, brevity penalty against
// the reference length closest to the candidate (shorter on ties). A zero
// match count for n >= 2 becomes 1 / (t_n + 1); an order with no candidate
// n-grams counts as precision 1. Empty candidate or no unigram match gives 0.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references, unsigned max_n = 4);

struct RougeL {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;
};

std::size_t lcs_length(const Tokens& a, const Tokens& b);
RougeL rouge_l(const Tokens& candidate, const Tokens& reference);

struct MetricScore {
  double bleu = 0.0;
  double rouge_l_p = 0.0;
  double rouge_l_r = 0.0;
  double rouge_l_f = 0.0;
};

MetricScore score_text(std::string_view candidate, std::string_view reference, TokenizerPolicy policy);

// Judge score rows: "setting<TAB>metric<TAB>item_id<TAB>rating", metric one
// of ovl_w, per, ovl_wo, rating an integer in 1..10. '#' lines are comments.
struct ScoreRow {
  std::string setting;
  std::string metric;
  std::string item_id;
  int rating = 0;
};

struct Aggregate {
  std::vector<std::string> settings;                             // first-appearance order
  std::map<std::pair<std::string, std::string>, double> means;   // (setting, metric)
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  // Running mean after each row, per (setting, metric), in file order.
  std::map<std::pair<std::string, std::string>, std::vector<double>> running;
  std::size_t rejected = 0;
};

inline constexpr std::string_view kMetricIds[] = {"ovl_w", "per", "ovl_wo"};

Aggregate aggregate_scores(std::string_view score_file);
// Grid with columns Ovl.(w), Per., Ovl.(w/o); means to two decimals, "-"
// where a cell has no rows.
std::string render_score_grid(const Aggregate& aggregate);
// "setting<TAB>metric<TAB>n<TAB>running_mean" for every prefix length.
std::string render_stability_curve(const Aggregate& aggregate);

enum class Outcome { win, tie, lose };
Outcome parse_outcome(std::string_view text);

struct WinTieLose {
  std::size_t win = 0, tie = 0, lose = 0;
  double win_pct = 0.0, tie_pct = 0.0, lose_pct = 0.0;

  std::size_t total() const noexcept { return win + tie + lose; }
  // "38/2/10"
  std::string counts_cell() const;
  // "76.0/4.0/20.0"
  std::string percent_cell() const;
};

WinTieLose win_tie_lose(const std::vector<Outcome>& outcomes);
// Baseline against itself: "-/N/-" with N the number of judged items.
std::string self_row_cell(std::size_t items);
// Judgment rows: "item_id<TAB>outcome".
std::vector<Outcome> parse_judgments(std::string_view text);

enum class TraceFormat { html, ansi };
TraceFormat parse_trace_format(std::string_view text);

struct Rgb {
  int r = 255, g = 255, b = 255;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// White blended toward the SLM hue (blue) for w > 0.5 and toward the LLM hue
// (red) for w < 0.5, with intensity |w - 0.5| * 2. swap_hues exchanges them.
Rgb weight_color(double w, bool swap_hues = false);

struct TraceRenderOptions {
  bool swap_hues = false;
  std::string separator = " ";
  std::string title = "Weight trace";
};

std::string render_weight_trace(const WeightTrace& trace, const std::vector<std::string>& tokens, TraceFormat format,
                                const TraceRenderOptions& options = {});

}  // namespace cogen
