#pragma once

#include "geoprobe/clustering.hpp"
#include "geoprobe/dataset.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace geoprobe {

struct LabelPair {
  int first = 0;
  int second = 0;
  friend bool operator==(const LabelPair&, const LabelPair&) = default;
};

/// Hull distances between the clusters of every label pair (i < j, canonical
/// order) of a linear ClusterSet.
struct DistanceVector {
  std::vector<double> values;
  std::vector<LabelPair> pair_order;
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return values.size(); }
};

/// Hull distances between every pair of clusters (symmetric, zero diagonal).
Eigen::MatrixXd cluster_distance_matrix(const ClusterSet& cs, unsigned threads = 1);

DistanceVector distance_vector(const ClusterSet& cs, unsigned threads = 1);

/// Pearson correlation; throws ZeroVariance if either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

double spatial_similarity(const DistanceVector& v1, const DistanceVector& v2);

/// Per label id, the smallest hull distance to any other label's cluster.
std::vector<double> min_distance_per_label(const DistanceVector& v);
std::vector<double> min_distance_per_label(const ClusterSet& cs, unsigned threads = 1);

struct StepReport {
  std::int64_t step = 0;
  std::size_t num_clusters = 0;
  bool linear = false;
  /// Present when the step is linear.
  std::optional<std::vector<double>> min_distances;
  std::optional<DistanceVector> distances;
  /// Indexed by label id.
  std::vector<Eigen::VectorXd> centroids;
  std::optional<double> similarity_to_origin;
  std::string note;
};

struct TrackReport {
  SeriesAxis axis = SeriesAxis::FineTuningSteps;
  std::vector<std::string> label_names;
  std::vector<StepReport> steps;
};

TrackReport track_series(const SnapshotSeries& series, const SeparabilityConfig& cfg = {}, unsigned threads = 1);

/// paths[label][step] is the label's centroid at that step.
std::vector<std::vector<Eigen::VectorXd>> centroid_paths(const SnapshotSeries& series);

/// centroid(after) - centroid(before), per label id.
std::vector<Eigen::VectorXd> difference_vectors(const LabeledPointSet& before, const LabeledPointSet& after);

struct CrossTaskReport {
  std::vector<std::string> label_names;
  std::vector<double> baseline_min;
  std::vector<double> tuned_min;
  std::vector<double> per_label_delta;
  int num_increased = 0;
  int num_decreased = 0;
  int num_unchanged = 0;
  double average_change = 0.0;
};

/// Deltas with magnitude at or below this count as unchanged.
inline constexpr double kUnchangedTolerance = 1e-9;

CrossTaskReport cross_task_report(const ClusterSet& baseline, const ClusterSet& tuned, unsigned threads = 1);

struct PcaProjection {
  Eigen::VectorXd mean;
  /// D x k, unit columns; the largest-magnitude entry of each column is positive.
  Eigen::MatrixXd axes;
  /// count x k
  Eigen::MatrixXd projected;
  /// Nonincreasing, sums to at most 1.
  Eigen::VectorXd explained_variance_ratio;
};

/// Rows of `vectors` projected onto the top-k principal axes.
PcaProjection pca_project(const Eigen::MatrixXd& vectors, Index k);

void to_json(nlohmann::json& j, const DistanceVector& v);
void to_json(nlohmann::json& j, const TrackReport& r);
void to_json(nlohmann::json& j, const CrossTaskReport& r);

/// Columns: step,label,min_distance,num_clusters,is_linear,similarity_to_origin
void write_track_csv(std::ostream& out, const TrackReport& r);
/// Columns: label,baseline_min_distance,tuned_min_distance,delta
void write_crosstask_csv(std::ostream& out, const CrossTaskReport& r);
/// Columns: num_increased,num_decreased,num_unchanged,average_change
void write_crosstask_summary_csv(std::ostream& out, const CrossTaskReport& r);
/// Header row of cluster descriptions, then one row per cluster.
void write_distance_matrix_csv(std::ostream& out, const ClusterSet& cs, const Eigen::MatrixXd& distances);

/// Shortest decimal text that round-trips the double.
std::string format_number(double value);

}  // namespace geoprobe
