#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cogen/error.hpp"
#include "cogen/report/report.hpp"

using namespace cogen;

namespace {

Tokens toks(std::string_view s) { return split_tokens(s, TokenizerPolicy::whitespace); }

}  // namespace

TEST_CASE("bleu with clipping, smoothing and brevity penalty") {
  // p = 2/4, 1/4, 1/3, 1/2 and BP = exp(1 - 6/4), computed separately.
  CHECK(bleu(toks("the the the the"), {toks("the cat is on the mat")}) == doctest::Approx(0.2304318198457308));
  CHECK(bleu(toks("a b c d"), {toks("a b c d")}) == 1.0);
  CHECK(bleu(toks("a b"), {toks("a b")}) == 1.0);
  CHECK(bleu({}, {toks("a")}) == 0.0);
  CHECK(bleu(toks("x y"), {toks("a b")}) == 0.0);
  CHECK_THROWS_AS(bleu(toks("a"), {}), InvalidInput);
}

TEST_CASE("bleu picks the closest reference length, shorter on ties") {
  auto c = toks("a b c d e");
  // References of length 3 and 7 are equally close; the shorter one means no penalty.
  CHECK(bleu(c, {toks("a b c d e f g"), toks("a b c")}) == doctest::Approx(bleu(c, {toks("a b c"), toks("a b c d e f g")})));
  const double only_long = bleu(c, {toks("a b c d e f g")});
  const double both = bleu(c, {toks("a b c d e f g"), toks("x y z")});
  CHECK(both > only_long);
}

TEST_CASE("rouge-l") {
  CHECK(lcs_length(toks("a b c d"), toks("a c b d")) == 3);
  auto r = rouge_l(toks("a b c d"), toks("a c b d"));
  CHECK(r.p == 0.75);
  CHECK(r.r == 0.75);
  CHECK(r.f == 0.75);
  auto s = rouge_l(toks("a b"), toks("a x b y"));
  CHECK(s.p == 1.0);
  CHECK(s.r == 0.5);
  CHECK(s.f == doctest::Approx(2.0 / 3.0));
  CHECK(rouge_l({}, toks("a")).f == 0.0);
  auto m = score_text("a b c d", "a c b d", TokenizerPolicy::whitespace);
  CHECK(m.rouge_l_f == 0.75);
}

TEST_CASE("score aggregation") {
  const char* file =
      "# comment\n"
      "cogen\tovl_w\t1\t8\n"
      "cogen\tovl_w\t2\t6\n"
      "slm\tper\t1\t5\n"
      "cogen\tper\t1\t11\n"
      "cogen\tovl_wo\t1\tseven\n"
      "slm\tovl_w\t1\t4\n";
  auto a = aggregate_scores(file);
  CHECK(a.settings == std::vector<std::string>{"cogen", "slm"});
  CHECK(a.rejected == 2);
  CHECK(a.means.at({"cogen", "ovl_w"}) == 7.0);
  CHECK(a.counts.at({"cogen", "ovl_w"}) == 2);
  CHECK(a.running.at({"cogen", "ovl_w"}) == std::vector<double>{8.0, 7.0});
  CHECK(render_score_grid(a) ==
        "Models  Ovl.(w)    Per.       Ovl.(w/o)\n"
        "cogen   7.00       -          -\n"
        "slm     4.00       5.00       -\n");
  CHECK(render_stability_curve(a) ==
        "cogen\tovl_w\t1\t8.000000\ncogen\tovl_w\t2\t7.000000\n"
        "slm\tovl_w\t1\t4.000000\nslm\tper\t1\t5.000000\n");
  CHECK_THROWS_AS(aggregate_scores("a\tbogus\t1\t5\n"), InvalidInput);
  CHECK_THROWS_AS(aggregate_scores("a\tper\t1\n"), InvalidInput);
}

TEST_CASE("win/tie/lose") {
  std::vector<Outcome> o(38, Outcome::win);
  o.insert(o.end(), 2, Outcome::tie);
  o.insert(o.end(), 10, Outcome::lose);
  auto w = win_tie_lose(o);
  CHECK(w.total() == 50);
  CHECK(w.counts_cell() == "38/2/10");
  CHECK(w.percent_cell() == "76.0/4.0/20.0");
  CHECK(self_row_cell(50) == "-/50/-");
  CHECK_THROWS_AS(win_tie_lose({}), InvalidInput);
  CHECK(parse_judgments("# x\n1\twin\n2\tlose\n") == std::vector<Outcome>{Outcome::win, Outcome::lose});
  CHECK_THROWS_AS(parse_judgments("1\tdraw\n"), InvalidInput);
  CHECK_THROWS_AS(parse_judgments("1 win\n"), InvalidInput);
}

TEST_CASE("weight colors") {
  CHECK(weight_color(0.5) == Rgb{255, 255, 255});
  CHECK(weight_color(1.0) == Rgb{0, 0, 255});
  CHECK(weight_color(0.0) == Rgb{255, 0, 0});
  CHECK(weight_color(0.75) == Rgb{128, 128, 255});
  CHECK(weight_color(1.0, true) == Rgb{255, 0, 0});
  CHECK(weight_color(0.0, true) == Rgb{0, 0, 255});
  CHECK_THROWS_AS(weight_color(1.5), InvalidInput);
  CHECK(parse_trace_format("ansi") == TraceFormat::ansi);
  CHECK_THROWS(parse_trace_format("svg"));
}

TEST_CASE("trace rendering escapes tokens") {
  WeightTrace t;
  t.mode = "fusion:mean";
  t.steps = {{2, 1.0, 1.0, 0.5}, {3, 0.0, 0.5, 1.0}};
  auto html = render_weight_trace(t, {"<b>", "&"}, TraceFormat::html);
  CHECK(html.find("&lt;b&gt;") != std::string::npos);
  CHECK(html.find("&amp;") != std::string::npos);
  CHECK(html.find("<b>") == std::string::npos);
  CHECK(html.find("background-color:#0000ff") != std::string::npos);
  auto ansi = render_weight_trace(t, {"x", "y"}, TraceFormat::ansi);
  CHECK(ansi.find("\x1b[48;2;0;0;255m") != std::string::npos);
  CHECK(ansi.find("\x1b[48;2;255;0;0m") != std::string::npos);
  CHECK_THROWS(render_weight_trace(t, {"x"}, TraceFormat::html));
}
