#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogen/core/distribution.hpp"
#include "cogen/fusion/fusion.hpp"

namespace cogen {

inline constexpr std::size_t kCombTopK = 10;
inline constexpr std::size_t kCombInput = 2 * kCombTopK;
inline constexpr std::size_t kCombHidden1 = 512;
inline constexpr std::size_t kCombHidden2 = 16;

/// Weights of the fusion-weight network. Matrices are row-major with the
/// input dimension first, so w1[i * kCombHidden1 + j] links input i to
/// hidden unit j.
struct CombModelParams {
  std::vector<double> w1;  // 20 x 512
  std::vector<double> b1;  // 512
  std::vector<double> w2;  // 512 x 16
  std::vector<double> b2;  // 16
  std::vector<double> w3;  // 16 x 1
  std::vector<double> b3;  // 1
  std::uint64_t seed = 0;

  static CombModelParams zeros();
  std::size_t parameter_count() const noexcept;
  // Flat views in declaration order (w1, b1, w2, b2, w3, b3).
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  void check() const;

  friend bool operator==(const CombModelParams&, const CombModelParams&) = default;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
CombModelParams comb_init(std::uint64_t seed);

enum class CombFeatures { probabilities, log_probabilities };

// x = concat(top10_l, top10_s): each side's ten largest probabilities in
// descending order, zero padded, not renormalized. The log variant feeds
// log(max(p, 1e-12)) instead.
std::vector<double> comb_features(const TokenDistribution& p_l, const TokenDistribution& p_s,
                                  CombFeatures mode = CombFeatures::probabilities);

// w = sigmoid(W3' relu(W2' relu(W1' x + b1) + b2) + b3), kept strictly in (0, 1).
double comb_forward(const CombModelParams& params, std::span<const double> top10_l,
                    std::span<const double> top10_s);

struct CombExample {
  std::vector<double> top10_l;
  std::vector<double> top10_s;
  AlignedPair aligned;
  TokenId target_id = 0;
};

// Builds a training example, or nullopt when the target lies outside both
// supports (such examples carry no signal for w and are skipped).
std::optional<CombExample> make_comb_example(const TokenDistribution& p_s, const TokenDistribution& p_l,
                                             TokenId target,
                                             CombFeatures mode = CombFeatures::probabilities);

inline constexpr double kCombProbFloor = 1e-12;

struct CombLossStats {
  std::size_t degenerate = 0;  // examples whose fused target probability hit the floor
};

// -log p_c[target] with p_c = fuse(aligned, fixed(w)), w = comb_forward(...).
double comb_loss(const CombModelParams& params, const CombExample& example, CombLossStats* stats = nullptr);
// Loss for an explicit w (no network), same fusion rule.
double comb_loss_at(const CombExample& example, double w, CombLossStats* stats = nullptr);

// Analytic gradient of comb_loss. Only w depends on the parameters; p_s and
// p_l are constants. ReLU subgradient at zero is zero.
CombModelParams comb_grad(const CombModelParams& params, const CombExample& example,
                          double* loss_out = nullptr);

struct CombTrainConfig {
  double learning_rate = 2e-3;
  std::size_t batch_size = 2;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CombEpoch {
  std::size_t epoch = 0;  // 0 is the untrained baseline
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
};

struct CombTrainReport {
  std::vector<CombEpoch> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t degenerate_train = 0;
  std::string stop_reason;
};

double comb_mean_loss(const CombModelParams& params, std::span<const CombExample> examples);

// Mini-batch SGD with a seeded shuffle per epoch; keeps the parameters with
// the best mean validation loss and stops after `patience` epochs without
// improvement or at max_epochs.
std::pair<CombModelParams, CombTrainReport> comb_train(std::span<const CombExample> train,
                                                       std::span<const CombExample> val,
                                                       const CombTrainConfig& config);

// Container: "CGCM", u16 version, u16 layer count, u32 dims (20, 512, 16, 1),
// u64 seed, then every parameter as a little-endian IEEE double, row-major,
// in the order w1 b1 w2 b2 w3 b3.
inline constexpr std::uint16_t kCombFormatVersion = 1;
std::string comb_serialize(const CombModelParams& params);
CombModelParams comb_deserialize(std::string_view bytes);
void comb_save(const CombModelParams& params, const std::filesystem::path& path);
CombModelParams comb_load(const std::filesystem::path& path);

}  // namespace cogen
