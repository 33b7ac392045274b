#pragma once

#include "geoprobe/dataset.hpp"
#include "geoprobe/error.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace geoprobe {

inline constexpr int kHiddenSizes[] = {32, 64, 128, 256};
inline constexpr double kMinRegWeight = 1e-7;
inline constexpr double kMaxRegWeight = 1.0;

struct ProbeConfig {
  int hidden1 = 32;
  int hidden2 = 32;
  /// Weight of the squared-weight penalty added to the mean cross-entropy.
  double reg_weight = 1e-4;
  /// Epochs.
  int max_iterations = 1000;
  int seeds = 5;
  double learning_rate = 1e-3;
  /// 0 selects min(200, N).
  int batch_size = 0;
  /// Training stops once the epoch loss fails to improve by `tol` for
  /// `patience` consecutive epochs.
  double tol = 1e-4;
  int patience = 10;

  void validate() const;
  int resolved_batch_size(Index n) const;
};

/// Two ReLU hidden layers and a linear output layer.
struct MlpParams {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  double squared_weight_norm() const;
  Index input_dim() const { return w1.cols(); }
  Index num_outputs() const { return w3.rows(); }
};

/// Glorot-uniform weights, zero biases, reproducible from `seed`.
MlpParams init_params(Index input_dim, int hidden1, int hidden2, int outputs, std::uint64_t seed);

/// Rows of logits for rows of x.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& x);

struct LossAndGradient {
  double loss = 0.0;
  MlpParams gradient;
};

/// Mean softmax cross-entropy over the rows plus reg_weight * squared weights.
LossAndGradient loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& x, std::span<const int> labels,
                                  double reg_weight);

/// Index of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

struct ProbeModel {
  MlpParams params;
  ProbeConfig config;
  std::vector<std::string> label_names;
  std::uint64_t seed = 0;
  /// Mean training loss per epoch.
  std::vector<double> loss_curve;
  std::vector<double> per_seed_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;

  std::vector<int> predict(const Eigen::MatrixXd& x) const { return argmax_rows(forward(params, x)); }
};

/// One seed of Adam on shuffled mini-batches.
ProbeModel train_probe(const LabeledPointSet& train, const ProbeConfig& cfg, std::uint64_t seed);

/// Fraction of rows whose argmax prediction matches the label.
double evaluate(const ProbeModel& model, const LabeledPointSet& test);

/// Trains cfg.seeds models (seeds base_seed, base_seed + 1, ...) and records
/// their test accuracies. The returned weights are those of the first seed.
ProbeModel train_and_evaluate(const LabeledPointSet& train, const LabeledPointSet& test, const ProbeConfig& cfg,
                              std::uint64_t base_seed, unsigned threads = 1);

/// `count` log-uniform values from 1e-7 to 1e0 inclusive.
std::vector<double> log_uniform_reg_weights(int count = 8);

struct ProbeSearchSpace {
  std::vector<int> hidden1{std::begin(kHiddenSizes), std::end(kHiddenSizes)};
  std::vector<int> hidden2{std::begin(kHiddenSizes), std::end(kHiddenSizes)};
  std::vector<double> reg_weights = log_uniform_reg_weights();
  /// Supplies everything but the swept fields.
  ProbeConfig base;
};

struct GridCell {
  ProbeConfig config;
  double validation_accuracy = 0.0;
};

struct GridSearchResult {
  ProbeConfig best;
  double best_accuracy = 0.0;
  std::vector<GridCell> cells;
};

/// Row indices of a per-label 80/20 split.
struct Split {
  std::vector<Index> train;
  std::vector<Index> validation;
};
Split stratified_split(const LabeledPointSet& set, double validation_fraction, std::uint64_t seed);

/// Scores every cell on a held-out stratified 20% of `train`; ties prefer the
/// smaller h1*h2, then the smaller regularizer weight.
GridSearchResult grid_search(const LabeledPointSet& train, const ProbeSearchSpace& space, std::uint64_t seed,
                             unsigned threads = 1);

/// JSON header line followed by little-endian float64 weights.
void save_probe_model(const std::filesystem::path& path, const ProbeModel& model);
ProbeModel load_probe_model(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ProbeConfig& cfg);
void from_json(const nlohmann::json& j, ProbeConfig& cfg);

}  // namespace geoprobe
