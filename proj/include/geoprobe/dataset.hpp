#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoprobe {

using Index = Eigen::Index;

/// An N x D matrix of embedding rows, each carrying one label.
///
/// Label ids index into label_names(), which is always sorted
/// lexicographically so that ids (and everything keyed by them, such as
/// distance vectors) line up across independently loaded files. Instances are
/// immutable once constructed.
class LabeledPointSet {
 public:
  /// Takes ids that already refer to a canonical (sorted, unique) name list.
  LabeledPointSet(Eigen::MatrixXd points, std::vector<int> labels,
                  std::vector<std::string> label_names);

  /// Builds the canonical name list from per-row label strings.
  static LabeledPointSet from_row_labels(Eigen::MatrixXd points,
                                         std::span<const std::string> row_labels);

  const Eigen::MatrixXd& points() const noexcept { return points_; }
  std::span<const int> labels() const noexcept { return labels_; }
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }

  Index size() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }
  int num_labels() const noexcept { return static_cast<int>(label_names_.size()); }

  int label(Index row) const { return labels_.at(static_cast<std::size_t>(row)); }
  const std::string& label_name(int id) const { return label_names_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find_label(std::string_view name) const;

  std::vector<Index> rows_with_label(int id) const;
  /// Copies the given rows into a dense matrix.
  Eigen::MatrixXd gather(std::span<const Index> rows) const;

  bool same_label_space(const LabeledPointSet& other) const;

  friend bool operator==(const LabeledPointSet& a, const LabeledPointSet& b);

 private:
  Eigen::MatrixXd points_;
  std::vector<int> labels_;
  std::vector<std::string> label_names_;
};

struct EmbeddingHeader {
  static constexpr std::string_view kMagic = "EMBV1";
  static constexpr std::string_view kDtype = "f32le";

  std::int64_t count = 0;
  std::int64_t dim = 0;
  std::map<std::string, std::string> meta;
};

struct Embedding {
  EmbeddingHeader header;
  Eigen::MatrixXd points;
};

/// Reads an EMBV file: one JSON header line, then count*dim little-endian
/// float32 values in row-major order. Values are widened to double.
Embedding read_embv(const std::filesystem::path& path);

/// Writes points narrowed to float32. Throws NonFiniteValue if a row does not
/// survive the narrowing.
void write_embv(const std::filesystem::path& path, const Eigen::MatrixXd& points,
                const std::map<std::string, std::string>& meta = {});

/// Reads `index<TAB>label_name` rows. Rows may appear in any order but the
/// indices must cover [0, expected_count) exactly once.
std::vector<std::string> read_labels_tsv(const std::filesystem::path& path,
                                         std::int64_t expected_count);

void write_labels_tsv(const std::filesystem::path& path, const LabeledPointSet& set);

LabeledPointSet load_point_set(const std::filesystem::path& embedding_path,
                               const std::filesystem::path& labels_path);

void save_point_set(const LabeledPointSet& set, const std::filesystem::path& embedding_path,
                    const std::filesystem::path& labels_path,
                    const std::map<std::string, std::string>& meta = {});

struct TokenPair {
  Index head = 0;
  Index modifier = 0;
  std::string label;
};

/// One row per pair: head coordinates followed by modifier coordinates.
LabeledPointSet concat_pairs(const LabeledPointSet& set, std::span<const TokenPair> pairs);

/// Mean of the rows carrying `label_id`.
Eigen::VectorXd centroid(const LabeledPointSet& set, int label_id);

enum class SeriesAxis { FineTuningSteps, Layers };

std::string_view to_string(SeriesAxis axis) noexcept;

struct Snapshot {
  std::int64_t step = 0;
  LabeledPointSet set;
};

/// Snapshots of the same points (same rows, same labels) whose coordinates
/// change from step to step.
class SnapshotSeries {
 public:
  SnapshotSeries(SeriesAxis axis, std::vector<Snapshot> steps);

  SeriesAxis axis() const noexcept { return axis_; }
  const std::vector<Snapshot>& steps() const noexcept { return steps_; }
  std::size_t size() const noexcept { return steps_.size(); }
  const Snapshot& operator[](std::size_t i) const { return steps_[i]; }
  const std::vector<std::string>& label_names() const { return steps_.front().set.label_names(); }

 private:
  SeriesAxis axis_;
  std::vector<Snapshot> steps_;
};

/// Loads `<dir>/step-<k>/layer-<l>.embv` (fine-tuning axis) or
/// `<dir>/layer-<l>.embv` (layer axis). Labels come from `labels.tsv` in the
/// step directory when present, otherwise from `<dir>/labels.tsv`. Without an
/// explicit layer the highest-numbered layer of each step is used.
SnapshotSeries load_series(const std::filesystem::path& directory,
                           std::optional<int> layer = std::nullopt);

}  // namespace geoprobe
