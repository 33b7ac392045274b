#include "geoprobe/probe.hpp"

#include "geoprobe/error.hpp"
#include "geoprobe/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace geoprobe {

namespace {

// std::uniform_*_distribution is implementation-defined; these are not.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

Eigen::MatrixXd glorot(Index rows, Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) w(r, c) = (2.0 * unit_uniform(rng) - 1.0) * limit;
  }
  return w;
}

LabeledPointSet subset(const LabeledPointSet& set, std::span<const Index> rows) {
  std::vector<int> labels;
  for (Index r : rows) labels.push_back(set.label(r));
  return LabeledPointSet(set.gather(rows), std::move(labels), set.label_names());
}

struct AdamState {
  MlpParams m, v;
  std::int64_t t = 0;

  explicit AdamState(const MlpParams& like) {
    m = like;
    m.w1.setZero();
    m.w2.setZero();
    m.w3.setZero();
    m.b1.setZero();
    m.b2.setZero();
    m.b3.setZero();
    v = m;
  }
};

template <typename Tensor>
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, double lr_t) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr_t * m.array() / (v.array().sqrt() + eps);
}

void adam_step(MlpParams& p, const MlpParams& g, AdamState& s, double lr) {
  ++s.t;
  const double t = static_cast<double>(s.t);
  const double lr_t = lr * std::sqrt(1.0 - std::pow(0.999, t)) / (1.0 - std::pow(0.9, t));
  adam_update(p.w1, g.w1, s.m.w1, s.v.w1, lr_t);
  adam_update(p.b1, g.b1, s.m.b1, s.v.b1, lr_t);
  adam_update(p.w2, g.w2, s.m.w2, s.v.w2, lr_t);
  adam_update(p.b2, g.b2, s.m.b2, s.v.b2, lr_t);
  adam_update(p.w3, g.w3, s.m.w3, s.v.w3, lr_t);
  adam_update(p.b3, g.b3, s.m.b3, s.v.b3, lr_t);
}

}  // namespace

void ProbeConfig::validate() const {
  auto allowed = [](int h) { return std::find(std::begin(kHiddenSizes), std::end(kHiddenSizes), h) != std::end(kHiddenSizes); };
  if (!allowed(hidden1) || !allowed(hidden2)) {
    throw Error(ErrorCode::InvalidArgument, "hidden sizes must come from {32, 64, 128, 256}");
  }
  if (!(reg_weight >= kMinRegWeight * (1.0 - 1e-12) && reg_weight <= kMaxRegWeight)) {
    throw Error(ErrorCode::InvalidArgument, "reg_weight must lie in [1e-7, 1]");
  }
  if (max_iterations < 1 || seeds < 1 || batch_size < 0 || patience < 1) {
    throw Error(ErrorCode::InvalidArgument, "iteration, seed, batch and patience counts must be positive");
  }
  if (!(learning_rate > 0.0) || !(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "bad learning rate or tol");
}

int ProbeConfig::resolved_batch_size(Index n) const {
  if (batch_size > 0) return static_cast<int>(std::min<Index>(batch_size, n));
  return static_cast<int>(std::min<Index>(200, n));
}

double MlpParams::squared_weight_norm() const {
  return w1.squaredNorm() + w2.squaredNorm() + w3.squaredNorm();
}

MlpParams init_params(Index input_dim, int hidden1, int hidden2, int outputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.w1 = glorot(hidden1, input_dim, rng);
  p.w2 = glorot(hidden2, hidden1, rng);
  p.w3 = glorot(outputs, hidden2, rng);
  p.b1 = Eigen::VectorXd::Zero(hidden1);
  p.b2 = Eigen::VectorXd::Zero(hidden2);
  p.b3 = Eigen::VectorXd::Zero(outputs);
  return p;
}

Eigen::MatrixXd forward(const MlpParams& p, const Eigen::MatrixXd& x) {
  if (x.cols() != p.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "input has dimension " + std::to_string(x.cols()) + ", model expects " + std::to_string(p.input_dim()));
  }
  const Eigen::MatrixXd h1 = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  const Eigen::MatrixXd h2 = ((h1 * p.w2.transpose()).rowwise() + p.b2.transpose()).cwiseMax(0.0);
  return (h2 * p.w3.transpose()).rowwise() + p.b3.transpose();
}

LossAndGradient loss_and_gradient(const MlpParams& p, const Eigen::MatrixXd& x, std::span<const int> labels,
                                  double reg_weight) {
  const Index rows = x.rows();
  const Eigen::MatrixXd h1 = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  const Eigen::MatrixXd h2 = ((h1 * p.w2.transpose()).rowwise() + p.b2.transpose()).cwiseMax(0.0);
  const Eigen::MatrixXd logits = (h2 * p.w3.transpose()).rowwise() + p.b3.transpose();

  Eigen::MatrixXd delta(rows, logits.cols());
  double ce = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const double top = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - top).exp();
    const double z = e.sum();
    const int y = labels[static_cast<std::size_t>(r)];
    ce += std::log(z) - (logits(r, y) - top);
    delta.row(r) = e / z;
    delta(r, y) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(rows);
  delta *= inv;

  LossAndGradient out;
  out.loss = ce * inv + reg_weight * p.squared_weight_norm();
  auto& g = out.gradient;
  g.w3 = delta.transpose() * h2 + 2.0 * reg_weight * p.w3;
  g.b3 = delta.colwise().sum().transpose();
  const Eigen::MatrixXd d2 = (delta * p.w3).cwiseProduct((h2.array() > 0.0).cast<double>().matrix());
  g.w2 = d2.transpose() * h1 + 2.0 * reg_weight * p.w2;
  g.b2 = d2.colwise().sum().transpose();
  const Eigen::MatrixXd d1 = (d2 * p.w2).cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
  g.w1 = d1.transpose() * x + 2.0 * reg_weight * p.w1;
  g.b1 = d1.colwise().sum().transpose();
  return out;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

ProbeModel train_probe(const LabeledPointSet& train, const ProbeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n = train.num_labels();
  std::vector<int> present(train.labels().begin(), train.labels().end());
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (n < 2 || present.size() < 2) throw Error(ErrorCode::SingleClass, "training data needs at least two labels");
  if (train.size() < n) throw Error(ErrorCode::PreconditionFailed, "fewer training rows than labels");

  ProbeModel model;
  model.config = cfg;
  model.seed = seed;
  model.label_names = train.label_names();
  model.params = init_params(train.dim(), cfg.hidden1, cfg.hidden2, n, seed);

  // Separate stream for batch order so it does not depend on the layer sizes.
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  AdamState adam(model.params);
  const Index rows = train.size();
  const int batch = cfg.resolved_batch_size(rows);
  std::vector<Index> order(static_cast<std::size_t>(rows));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);

  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < cfg.max_iterations; ++epoch) {
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (Index start = 0; start < rows; start += batch) {
      const Index len = std::min<Index>(batch, rows - start);
      xb.resize(len, train.dim());
      yb.resize(static_cast<std::size_t>(len));
      for (Index i = 0; i < len; ++i) {
        const Index r = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = train.points().row(r);
        yb[static_cast<std::size_t>(i)] = train.label(r);
      }
      const auto lg = loss_and_gradient(model.params, xb, yb, cfg.reg_weight);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss * static_cast<double>(len);
      adam_step(model.params, lg.gradient, adam, cfg.learning_rate);
    }
    epoch_loss /= static_cast<double>(rows);
    model.loss_curve.push_back(epoch_loss);

    if (epoch_loss > best_loss - cfg.tol) {
      if (++stale >= cfg.patience) break;
    } else {
      stale = 0;
    }
    best_loss = std::min(best_loss, epoch_loss);
  }
  return model;
}

double evaluate(const ProbeModel& model, const LabeledPointSet& test) {
  if (test.dim() != model.params.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "test dimension " + std::to_string(test.dim()) + " vs model " +
                                                  std::to_string(model.params.input_dim()));
  }
  // Test files may carry a subset of the training labels, so match by name.
  std::vector<int> truth;
  truth.reserve(static_cast<std::size_t>(test.size()));
  for (Index r = 0; r < test.size(); ++r) {
    const auto& name = test.label_name(test.label(r));
    const auto it = std::lower_bound(model.label_names.begin(), model.label_names.end(), name);
    const bool known = it != model.label_names.end() && *it == name;
    truth.push_back(known ? static_cast<int>(it - model.label_names.begin()) : -1);
  }
  const auto predicted = model.predict(test.points());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

ProbeModel train_and_evaluate(const LabeledPointSet& train, const LabeledPointSet& test, const ProbeConfig& cfg,
                              std::uint64_t base_seed, unsigned threads) {
  cfg.validate();
  if (test.dim() != train.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "train dimension " + std::to_string(train.dim()) + " vs test " + std::to_string(test.dim()));
  }
  std::vector<ProbeModel> runs(static_cast<std::size_t>(cfg.seeds));
  std::vector<double> accuracies(runs.size());
  parallel_for(runs.size(), threads, [&](std::size_t s) {
    runs[s] = train_probe(train, cfg, base_seed + s);
    accuracies[s] = evaluate(runs[s], test);
  });
  ProbeModel model = std::move(runs.front());
  model.per_seed_accuracies = accuracies;
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  double var = 0.0;
  for (double a : accuracies) var += (a - mean) * (a - mean);
  model.mean_accuracy = mean;
  model.std_accuracy = std::sqrt(var / static_cast<double>(accuracies.size()));
  return model;
}

std::vector<double> log_uniform_reg_weights(int count) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "need at least one regularizer weight");
  if (count == 1) return {kMinRegWeight};
  std::vector<double> out;
  const double lo = std::log10(kMinRegWeight), hi = std::log10(kMaxRegWeight);
  for (int i = 0; i < count; ++i) {
    out.push_back(std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  out.front() = kMinRegWeight;
  out.back() = kMaxRegWeight;
  return out;
}

Split stratified_split(const LabeledPointSet& set, double validation_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Split split;
  for (int l = 0; l < set.num_labels(); ++l) {
    auto rows = set.rows_with_label(l);
    shuffle(rows, rng);
    const auto count = static_cast<Index>(rows.size());
    const Index take = std::min<Index>(std::max<Index>(count - 1, 0),
                                       static_cast<Index>(std::llround(validation_fraction * static_cast<double>(count))));
    split.validation.insert(split.validation.end(), rows.begin(), rows.begin() + take);
    split.train.insert(split.train.end(), rows.begin() + take, rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

GridSearchResult grid_search(const LabeledPointSet& train, const ProbeSearchSpace& space, std::uint64_t seed,
                             unsigned threads) {
  if (train.size() < 10) throw Error(ErrorCode::PreconditionFailed, "grid search needs at least 10 training rows");
  if (space.hidden1.empty() || space.hidden2.empty() || space.reg_weights.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty search space");
  }
  const Split split = stratified_split(train, 0.2, seed);
  if (split.validation.empty()) throw Error(ErrorCode::PreconditionFailed, "validation split is empty");
  const LabeledPointSet fit = subset(train, split.train);
  const LabeledPointSet held_out = subset(train, split.validation);

  GridSearchResult result;
  for (int h1 : space.hidden1) {
    for (int h2 : space.hidden2) {
      for (double reg : space.reg_weights) {
        GridCell cell;
        cell.config = space.base;
        cell.config.hidden1 = h1;
        cell.config.hidden2 = h2;
        cell.config.reg_weight = reg;
        cell.config.validate();
        result.cells.push_back(cell);
      }
    }
  }
  parallel_for(result.cells.size(), threads, [&](std::size_t i) {
    auto& cell = result.cells[i];
    cell.validation_accuracy = evaluate(train_probe(fit, cell.config, seed), held_out);
  });

  auto key = [](const GridCell& c) {
    return std::tuple(-c.validation_accuracy, c.config.hidden1 * c.config.hidden2, c.config.reg_weight,
                      c.config.hidden1);
  };
  const auto best = std::min_element(result.cells.begin(), result.cells.end(),
                                     [&](const GridCell& a, const GridCell& b) { return key(a) < key(b); });
  result.best = best->config;
  result.best_accuracy = best->validation_accuracy;
  return result;
}

void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"hidden_sizes", {c.hidden1, c.hidden2}},
       {"reg_weight", c.reg_weight},
       {"max_iterations", c.max_iterations},
       {"seeds", c.seeds},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"tol", c.tol},
       {"patience", c.patience}};
}

void from_json(const nlohmann::json& j, ProbeConfig& c) {
  if (auto it = j.find("hidden_sizes"); it != j.end()) {
    c.hidden1 = it->at(0).get<int>();
    c.hidden2 = it->at(1).get<int>();
  }
  c.reg_weight = j.value("reg_weight", c.reg_weight);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.seeds = j.value("seeds", c.seeds);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tol = j.value("tol", c.tol);
  c.patience = j.value("patience", c.patience);
}

namespace {

template <typename Tensor>
void append_tensor(std::vector<double>& out, const Tensor& t) {
  // Row-major order.
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) out.push_back(t(r, c));
  }
}

template <typename Tensor>
void read_tensor(Tensor& t, const std::vector<double>& in, std::size_t& pos) {
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) t(r, c) = in[pos++];
  }
}

std::uint64_t little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return out;
  }
  return v;
}

}  // namespace

void save_probe_model(const std::filesystem::path& path, const ProbeModel& model) {
  const auto& p = model.params;
  nlohmann::json header = {{"magic", "GPROBE1"},
                           {"dtype", "f64le"},
                           {"input_dim", p.input_dim()},
                           {"hidden_sizes", {p.w1.rows(), p.w2.rows()}},
                           {"num_labels", p.num_outputs()},
                           {"label_names", model.label_names},
                           {"config", model.config},
                           {"seed", model.seed},
                           {"per_seed_accuracies", model.per_seed_accuracies},
                           {"mean_accuracy", model.mean_accuracy},
                           {"std_accuracy", model.std_accuracy},
                           {"loss_curve", model.loss_curve},
                           {"payload", {"w1", "b1", "w2", "b2", "w3", "b3"}}};
  std::vector<double> values;
  append_tensor(values, p.w1);
  append_tensor(values, p.b1);
  append_tensor(values, p.w2);
  append_tensor(values, p.b2);
  append_tensor(values, p.w3);
  append_tensor(values, p.b3);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  for (double v : values) {
    const auto bits = little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

ProbeModel load_probe_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MagicMismatch, path.string() + " has no JSON header");
  }
  if (header.value("magic", "") != "GPROBE1") throw Error(ErrorCode::MagicMismatch, path.string() + " is not a probe model");

  ProbeModel m;
  const auto d = header.at("input_dim").get<Index>();
  const auto h1 = header.at("hidden_sizes").at(0).get<Index>();
  const auto h2 = header.at("hidden_sizes").at(1).get<Index>();
  const auto n = header.at("num_labels").get<Index>();
  m.label_names = header.at("label_names").get<std::vector<std::string>>();
  m.config = header.at("config").get<ProbeConfig>();
  m.seed = header.at("seed").get<std::uint64_t>();
  m.per_seed_accuracies = header.at("per_seed_accuracies").get<std::vector<double>>();
  m.mean_accuracy = header.at("mean_accuracy").get<double>();
  m.std_accuracy = header.at("std_accuracy").get<double>();
  m.loss_curve = header.at("loss_curve").get<std::vector<double>>();

  m.params.w1.resize(h1, d);
  m.params.b1.resize(h1);
  m.params.w2.resize(h2, h1);
  m.params.b2.resize(h2);
  m.params.w3.resize(n, h2);
  m.params.b3.resize(n);
  const auto total = static_cast<std::size_t>(h1 * d + h1 + h2 * h1 + h2 + n * h2 + n);
  std::vector<double> values(total);
  for (auto& v : values) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw Error(ErrorCode::CountMismatch, path.string() + ": weight payload truncated");
    }
    v = std::bit_cast<double>(little_endian(bits));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::CountMismatch, path.string() + ": trailing bytes");
  std::size_t pos = 0;
  read_tensor(m.params.w1, values, pos);
  read_tensor(m.params.b1, values, pos);
  read_tensor(m.params.w2, values, pos);
  read_tensor(m.params.b2, values, pos);
  read_tensor(m.params.w3, values, pos);
  read_tensor(m.params.b3, values, pos);
  return m;
}

}  // namespace geoprobe
