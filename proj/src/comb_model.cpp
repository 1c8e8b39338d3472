#include "cogen/combmodel/comb_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "cogen/core/rng.hpp"
#include "cogen/error.hpp"
#include "json_util.hpp"

namespace cogen {

namespace {

constexpr double kMaxBelowOne = 1.0 - 0x1.0p-53;

struct Activations {
  std::vector<double> x, z1, a1, z2, a2;
  double z3 = 0.0;
  double w = 0.5;
};

double stable_sigmoid(double z) noexcept {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return std::clamp(s, std::numeric_limits<double>::min(), kMaxBelowOne);
}

void forward(const CombModelParams& p, std::span<const double> top_l, std::span<const double> top_s,
             Activations& act) {
  if (top_l.size() != kCombTopK || top_s.size() != kCombTopK)
    throw InvalidInput("CombModel expects " + std::to_string(kCombTopK) + " probabilities per source, got " +
                       std::to_string(top_l.size()) + " and " + std::to_string(top_s.size()));
  act.x.assign(top_l.begin(), top_l.end());
  act.x.insert(act.x.end(), top_s.begin(), top_s.end());
  for (double v : act.x)
    if (!std::isfinite(v)) throw InvalidInput("CombModel input is not finite");

  act.z1.assign(p.b1.begin(), p.b1.end());
  for (std::size_t i = 0; i < kCombInput; ++i) {
    const double xi = act.x[i];
    if (xi == 0.0) continue;
    const double* row = p.w1.data() + i * kCombHidden1;
    for (std::size_t j = 0; j < kCombHidden1; ++j) act.z1[j] += xi * row[j];
  }
  act.a1.resize(kCombHidden1);
  for (std::size_t j = 0; j < kCombHidden1; ++j) act.a1[j] = act.z1[j] > 0.0 ? act.z1[j] : 0.0;

  act.z2.assign(p.b2.begin(), p.b2.end());
  for (std::size_t i = 0; i < kCombHidden1; ++i) {
    const double ai = act.a1[i];
    if (ai == 0.0) continue;
    const double* row = p.w2.data() + i * kCombHidden2;
    for (std::size_t j = 0; j < kCombHidden2; ++j) act.z2[j] += ai * row[j];
  }
  act.a2.resize(kCombHidden2);
  for (std::size_t j = 0; j < kCombHidden2; ++j) act.a2[j] = act.z2[j] > 0.0 ? act.z2[j] : 0.0;

  act.z3 = p.b3[0];
  for (std::size_t j = 0; j < kCombHidden2; ++j) act.z3 += act.a2[j] * p.w3[j];
  act.w = stable_sigmoid(act.z3);
}

struct TargetMass {
  double a = 0.0, b = 0.0;  // p_s[y], p_l[y]
  double A = 1.0, B = 1.0;  // support masses (only used when renormalizing)
};

TargetMass target_mass(const CombExample& ex) {
  const auto& pr = ex.aligned;
  TargetMass m;
  auto it = std::lower_bound(pr.support.begin(), pr.support.end(), ex.target_id);
  if (it != pr.support.end() && *it == ex.target_id) {
    const auto k = static_cast<std::size_t>(it - pr.support.begin());
    m.a = pr.p_s[k];
    m.b = pr.p_l[k];
  }
  if (!pr.dense) {
    m.A = std::accumulate(pr.p_s.begin(), pr.p_s.end(), 0.0);
    m.B = std::accumulate(pr.p_l.begin(), pr.p_l.end(), 0.0);
  }
  return m;
}

// Loss and dL/dw at a given w.
std::pair<double, double> loss_and_slope(const CombExample& ex, double w, CombLossStats* stats) {
  const TargetMass m = target_mass(ex);
  const double num = w * m.a + (1.0 - w) * m.b;
  const double den = ex.aligned.dense ? 1.0 : w * m.A + (1.0 - w) * m.B;
  const double pc = den > 0.0 ? num / den : 0.0;
  if (!(pc > kCombProbFloor)) {
    if (stats) ++stats->degenerate;
    return {-std::log(kCombProbFloor), 0.0};
  }
  double slope = -(m.a - m.b) / num;
  if (!ex.aligned.dense) slope += (m.A - m.B) / den;
  return {-std::log(pc), slope};
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw LoadError("CombModel file is truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::string_view raw(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw LoadError("CombModel file is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

CombModelParams CombModelParams::zeros() {
  CombModelParams p;
  p.w1.assign(kCombInput * kCombHidden1, 0.0);
  p.b1.assign(kCombHidden1, 0.0);
  p.w2.assign(kCombHidden1 * kCombHidden2, 0.0);
  p.b2.assign(kCombHidden2, 0.0);
  p.w3.assign(kCombHidden2, 0.0);
  p.b3.assign(1, 0.0);
  return p;
}

std::size_t CombModelParams::parameter_count() const noexcept {
  return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

std::vector<std::span<double>> CombModelParams::blocks() { return {w1, b1, w2, b2, w3, b3}; }
std::vector<std::span<const double>> CombModelParams::blocks() const { return {w1, b1, w2, b2, w3, b3}; }

void CombModelParams::check() const {
  if (w1.size() != kCombInput * kCombHidden1 || b1.size() != kCombHidden1 ||
      w2.size() != kCombHidden1 * kCombHidden2 || b2.size() != kCombHidden2 || w3.size() != kCombHidden2 ||
      b3.size() != 1)
    throw InvalidInput("CombModel parameter shapes do not match 20x512x16x1");
  for (auto block : blocks())
    for (double v : block)
      if (!std::isfinite(v)) throw InvalidInput("CombModel parameter is not finite");
}

CombModelParams comb_init(std::uint64_t seed) {
  CombModelParams p = CombModelParams::zeros();
  p.seed = seed;
  Rng rng(seed);
  auto fill = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w) v = bound * (2.0 * rng.next_double() - 1.0);
  };
  fill(p.w1, kCombInput, kCombHidden1);
  fill(p.w2, kCombHidden1, kCombHidden2);
  fill(p.w3, kCombHidden2, 1);
  return p;
}

std::vector<double> comb_features(const TokenDistribution& p_l, const TokenDistribution& p_s, CombFeatures mode) {
  std::vector<double> x = top_probs(p_l, kCombTopK);
  std::vector<double> s = top_probs(p_s, kCombTopK);
  x.insert(x.end(), s.begin(), s.end());
  if (mode == CombFeatures::log_probabilities)
    for (double& v : x) v = std::log(std::max(v, kCombProbFloor));
  return x;
}

double comb_forward(const CombModelParams& params, std::span<const double> top10_l,
                    std::span<const double> top10_s) {
  Activations act;
  forward(params, top10_l, top10_s, act);
  return act.w;
}

std::optional<CombExample> make_comb_example(const TokenDistribution& p_s, const TokenDistribution& p_l,
                                             TokenId target, CombFeatures mode) {
  auto x = comb_features(p_l, p_s, mode);
  CombExample ex;
  ex.top10_l.assign(x.begin(), x.begin() + kCombTopK);
  ex.top10_s.assign(x.begin() + kCombTopK, x.end());
  ex.aligned = align_supports(p_s, p_l);
  ex.target_id = target;
  if (!std::binary_search(ex.aligned.support.begin(), ex.aligned.support.end(), target)) return std::nullopt;
  return ex;
}

double comb_loss_at(const CombExample& example, double w, CombLossStats* stats) {
  return loss_and_slope(example, w, stats).first;
}

double comb_loss(const CombModelParams& params, const CombExample& example, CombLossStats* stats) {
  Activations act;
  forward(params, example.top10_l, example.top10_s, act);
  return comb_loss_at(example, act.w, stats);
}

CombModelParams comb_grad(const CombModelParams& params, const CombExample& example, double* loss_out) {
  Activations act;
  forward(params, example.top10_l, example.top10_s, act);
  const auto [loss, dl_dw] = loss_and_slope(example, act.w, nullptr);
  if (loss_out) *loss_out = loss;

  CombModelParams g = CombModelParams::zeros();
  g.seed = params.seed;
  const double dz3 = dl_dw * act.w * (1.0 - act.w);
  if (dz3 == 0.0) return g;

  g.b3[0] = dz3;
  std::vector<double> dz2(kCombHidden2, 0.0);
  for (std::size_t j = 0; j < kCombHidden2; ++j) {
    g.w3[j] = dz3 * act.a2[j];
    dz2[j] = act.z2[j] > 0.0 ? dz3 * params.w3[j] : 0.0;
    g.b2[j] = dz2[j];
  }
  std::vector<double> dz1(kCombHidden1, 0.0);
  for (std::size_t i = 0; i < kCombHidden1; ++i) {
    const double* row = params.w2.data() + i * kCombHidden2;
    double* grow = g.w2.data() + i * kCombHidden2;
    double da1 = 0.0;
    for (std::size_t j = 0; j < kCombHidden2; ++j) {
      grow[j] = act.a1[i] * dz2[j];
      da1 += row[j] * dz2[j];
    }
    dz1[i] = act.z1[i] > 0.0 ? da1 : 0.0;
    g.b1[i] = dz1[i];
  }
  for (std::size_t k = 0; k < kCombInput; ++k) {
    const double xk = act.x[k];
    if (xk == 0.0) continue;
    double* grow = g.w1.data() + k * kCombHidden1;
    for (std::size_t i = 0; i < kCombHidden1; ++i) grow[i] = xk * dz1[i];
  }
  return g;
}

void CombTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
  if (batch_size == 0 || max_epochs == 0 || patience == 0)
    throw InvalidConfig("batch size, epochs and patience must be positive");
}

double comb_mean_loss(const CombModelParams& params, std::span<const CombExample> examples) {
  if (examples.empty()) throw InvalidInput("mean loss over an empty example set");
  double total = 0.0;
  for (const auto& ex : examples) total += comb_loss(params, ex);
  return total / static_cast<double>(examples.size());
}

std::pair<CombModelParams, CombTrainReport> comb_train(std::span<const CombExample> train,
                                                       std::span<const CombExample> val,
                                                       const CombTrainConfig& config) {
  if (train.empty() || val.empty()) throw InvalidInput("CombModel training needs non-empty train and val splits");
  config.validate();

  CombModelParams params = comb_init(config.seed);
  CombTrainReport report;
  CombLossStats stats;
  for (const auto& ex : train) comb_loss(params, ex, &stats);
  report.degenerate_train = stats.degenerate;

  CombModelParams best = params;
  report.best_val_loss = comb_mean_loss(params, val);
  report.epochs.push_back({0, comb_mean_loss(params, train), report.best_val_loss, true});

  Rng rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CombModelParams acc = CombModelParams::zeros();
  std::size_t stale = 0;
  report.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (auto block : acc.blocks()) std::fill(block.begin(), block.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        double loss = 0.0;
        CombModelParams g = comb_grad(params, train[order[k]], &loss);
        train_total += loss;
        auto dst = acc.blocks();
        auto src = g.blocks();
        for (std::size_t b = 0; b < dst.size(); ++b)
          for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += src[b][i];
      }
      const double step = config.learning_rate / static_cast<double>(end - start);
      auto dst = params.blocks();
      auto src = acc.blocks();
      for (std::size_t b = 0; b < dst.size(); ++b)
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] -= step * src[b][i];
    }

    const double val_loss = comb_mean_loss(params, val);
    const bool improved = val_loss < report.best_val_loss;
    report.epochs.push_back({epoch, train_total / static_cast<double>(train.size()), val_loss, improved});
    if (improved) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best = params;
      stale = 0;
    } else if (++stale >= config.patience) {
      report.stop_reason = "patience";
      break;
    }
  }
  return {std::move(best), std::move(report)};
}

std::string comb_serialize(const CombModelParams& params) {
  params.check();
  std::string out = "CGCM";
  put_u16(out, kCombFormatVersion);
  put_u16(out, 3);
  for (auto d : {kCombInput, kCombHidden1, kCombHidden2, std::size_t{1}}) put_u32(out, static_cast<std::uint32_t>(d));
  put_u64(out, params.seed);
  for (auto block : params.blocks())
    for (double v : block) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

CombModelParams comb_deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(4) != "CGCM") throw LoadError("not a CombModel file (bad magic)");
  const auto version = static_cast<std::uint16_t>(r.take(2));
  if (version != kCombFormatVersion)
    throw LoadError("unsupported CombModel format version " + std::to_string(version));
  const auto layers = r.take(2);
  std::vector<std::uint64_t> dims;
  for (std::uint64_t i = 0; i < layers + 1 && i < 16; ++i) dims.push_back(r.take(4));
  const std::vector<std::uint64_t> expected{kCombInput, kCombHidden1, kCombHidden2, 1};
  if (dims != expected) {
    std::string shape;
    for (auto d : dims) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    throw LoadError("CombModel shape mismatch: file declares " + shape + ", expected 20x512x16x1");
  }
  CombModelParams p = CombModelParams::zeros();
  p.seed = r.take(8);
  for (auto block : p.blocks())
    for (double& v : block) v = std::bit_cast<double>(r.take(8));
  if (!r.done()) throw LoadError("CombModel file has trailing bytes");
  p.check();
  return p;
}

void comb_save(const CombModelParams& params, const std::filesystem::path& path) {
  detail::write_file(path, comb_serialize(params));
}

CombModelParams comb_load(const std::filesystem::path& path) {
  return comb_deserialize(detail::read_file(path));
}

}  // namespace cogen
