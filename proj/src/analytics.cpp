#include "geoprobe/analytics.hpp"

#include "geoprobe/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace geoprobe {

namespace {

// Cluster index per label id; throws NotLinear unless every label owns
// exactly one cluster.
std::vector<std::size_t> linear_clusters(const ClusterSet& cs) {
  const int n = cs.source().num_labels();
  std::vector<std::size_t> owner(static_cast<std::size_t>(n), std::numeric_limits<std::size_t>::max());
  bool ok = count_clusters(cs) == static_cast<std::size_t>(n);
  for (std::size_t i = 0; ok && i < cs.clusters().size(); ++i) {
    auto& slot = owner[static_cast<std::size_t>(cs.clusters()[i].label)];
    if (slot != std::numeric_limits<std::size_t>::max()) ok = false;
    slot = i;
  }
  if (!ok) {
    throw Error(ErrorCode::NotLinear, std::to_string(count_clusters(cs)) + " clusters for " + std::to_string(n) +
                                          " labels");
  }
  return owner;
}

}  // namespace

Eigen::MatrixXd cluster_distance_matrix(const ClusterSet& cs, unsigned threads) {
  const std::size_t m = cs.clusters().size();
  std::vector<Eigen::MatrixXd> points;
  for (std::size_t i = 0; i < m; ++i) points.push_back(cs.points_of(i));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    values[k] = hull_distance(points[pairs[k].first], points[pairs[k].second], cs.config()).distance;
  });
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Index>(m), static_cast<Index>(m));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto i = static_cast<Index>(pairs[k].first);
    const auto j = static_cast<Index>(pairs[k].second);
    out(i, j) = out(j, i) = values[k];
  }
  return out;
}

DistanceVector distance_vector(const ClusterSet& cs, unsigned threads) {
  const auto owner = linear_clusters(cs);
  const int n = cs.source().num_labels();
  DistanceVector v;
  v.label_names = cs.source().label_names();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) v.pair_order.push_back({i, j});
  }
  std::vector<Eigen::MatrixXd> points;
  for (int l = 0; l < n; ++l) points.push_back(cs.points_of(owner[static_cast<std::size_t>(l)]));
  v.values.resize(v.pair_order.size());
  parallel_for(v.pair_order.size(), threads, [&](std::size_t k) {
    const auto [i, j] = v.pair_order[k];
    v.values[k] = hull_distance(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)],
                                cs.config())
                      .distance;
  });
  return v;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "correlated sequences differ in length");
  if (x.empty()) throw Error(ErrorCode::ZeroVariance, "empty sequences");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::ZeroVariance, "a distance vector has zero variance");
  // sqrt(fl(s * s)) == s in binary floating point, so r(v, v) is exactly 1.
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spatial_similarity(const DistanceVector& v1, const DistanceVector& v2) {
  if (v1.pair_order != v2.pair_order || v1.label_names != v2.label_names) {
    throw Error(ErrorCode::PairOrderMismatch, "distance vectors do not share a label pair order");
  }
  return pearson(v1.values, v2.values);
}

std::vector<double> min_distance_per_label(const DistanceVector& v) {
  const auto n = v.label_names.size();
  if (n < 2) throw Error(ErrorCode::PreconditionFailed, "minimum distances need at least two labels");
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < v.values.size(); ++k) {
    const auto [i, j] = v.pair_order[k];
    out[static_cast<std::size_t>(i)] = std::min(out[static_cast<std::size_t>(i)], v.values[k]);
    out[static_cast<std::size_t>(j)] = std::min(out[static_cast<std::size_t>(j)], v.values[k]);
  }
  return out;
}

std::vector<double> min_distance_per_label(const ClusterSet& cs, unsigned threads) {
  if (cs.source().num_labels() < 2) {
    throw Error(ErrorCode::PreconditionFailed, "minimum distances need at least two labels");
  }
  return min_distance_per_label(distance_vector(cs, threads));
}

TrackReport track_series(const SnapshotSeries& series, const SeparabilityConfig& cfg, unsigned threads) {
  TrackReport report;
  report.axis = series.axis();
  report.label_names = series.label_names();
  report.steps.resize(series.size());

  // Steps are independent; nested separability work stays single-threaded.
  parallel_for(series.size(), threads, [&](std::size_t s) {
    const auto& snap = series[s];
    StepReport& step = report.steps[s];
    step.step = snap.step;
    for (int l = 0; l < snap.set.num_labels(); ++l) step.centroids.push_back(centroid(snap.set, l));
    const ClusterSet cs = cluster(snap.set, cfg);
    step.num_clusters = count_clusters(cs);
    step.linear = is_linear(cs);
    if (!step.linear) {
      step.note = "NotLinear: " + std::to_string(step.num_clusters) + " clusters for " +
                  std::to_string(snap.set.num_labels()) + " labels";
      return;
    }
    step.distances = distance_vector(cs);
    if (snap.set.num_labels() >= 2) step.min_distances = min_distance_per_label(*step.distances);
  });

  const auto& origin = report.steps.front();
  for (std::size_t s = 0; s < report.steps.size(); ++s) {
    auto& step = report.steps[s];
    if (!step.distances || !origin.distances) continue;
    if (s == 0) {
      step.similarity_to_origin = 1.0;
      continue;
    }
    try {
      step.similarity_to_origin = spatial_similarity(*origin.distances, *step.distances);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      step.note = e.what();
    }
  }
  return report;
}

std::vector<std::vector<Eigen::VectorXd>> centroid_paths(const SnapshotSeries& series) {
  const int n = static_cast<int>(series.label_names().size());
  std::vector<std::vector<Eigen::VectorXd>> paths(static_cast<std::size_t>(n));
  for (const auto& snap : series.steps()) {
    for (int l = 0; l < n; ++l) paths[static_cast<std::size_t>(l)].push_back(centroid(snap.set, l));
  }
  return paths;
}

std::vector<Eigen::VectorXd> difference_vectors(const LabeledPointSet& before, const LabeledPointSet& after) {
  if (!before.same_label_space(after)) {
    throw Error(ErrorCode::InconsistentLabelSpace, "before and after do not share rows and labels");
  }
  if (before.dim() != after.dim()) throw Error(ErrorCode::DimensionMismatch, "before and after differ in dimension");
  std::vector<Eigen::VectorXd> out;
  for (int l = 0; l < before.num_labels(); ++l) out.push_back(centroid(after, l) - centroid(before, l));
  return out;
}

CrossTaskReport cross_task_report(const ClusterSet& baseline, const ClusterSet& tuned, unsigned threads) {
  if (baseline.source().label_names() != tuned.source().label_names()) {
    throw Error(ErrorCode::LabelSpaceMismatch, "baseline and tuned use different label sets");
  }
  CrossTaskReport r;
  r.label_names = baseline.source().label_names();
  r.baseline_min = min_distance_per_label(baseline, threads);
  r.tuned_min = min_distance_per_label(tuned, threads);
  double total = 0.0;
  for (std::size_t l = 0; l < r.label_names.size(); ++l) {
    const double delta = r.tuned_min[l] - r.baseline_min[l];
    r.per_label_delta.push_back(delta);
    total += delta;
    if (std::abs(delta) <= kUnchangedTolerance) {
      ++r.num_unchanged;
    } else if (delta > 0.0) {
      ++r.num_increased;
    } else {
      ++r.num_decreased;
    }
  }
  r.average_change = total / static_cast<double>(r.label_names.size());
  return r;
}

PcaProjection pca_project(const Eigen::MatrixXd& vectors, Index k) {
  const Index count = vectors.rows();
  const Index dim = vectors.cols();
  if (count < 2) throw Error(ErrorCode::PreconditionFailed, "PCA needs at least two vectors");
  if (k < 1 || k > std::min(dim, count)) {
    throw Error(ErrorCode::InvalidArgument, "target dimension " + std::to_string(k) + " outside [1, min(D, count)]");
  }
  if (!vectors.allFinite()) throw Error(ErrorCode::NonFiniteValue, "PCA input contains non-finite values");
  if ((vectors.rowwise() - vectors.row(0)).cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::DegenerateInput, "all vectors are identical");
  }

  PcaProjection out;
  out.mean = vectors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = vectors.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(count - 1);
  double total = cov.trace();
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateInput, "zero total variance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "covariance eigendecomposition failed");
  total = std::max(total, eig.eigenvalues().cwiseMax(0.0).sum());
  out.axes.resize(dim, k);
  out.explained_variance_ratio.resize(k);
  for (Index c = 0; c < k; ++c) {
    const Index src = dim - 1 - c;  // eigenvalues come in increasing order
    Eigen::VectorXd axis = eig.eigenvectors().col(src);
    Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis[big] < 0.0) axis = -axis;
    out.axes.col(c) = axis;
    out.explained_variance_ratio[c] = std::max(0.0, eig.eigenvalues()[src]) / total;
  }
  out.projected = centered * out.axes;
  return out;
}

}  // namespace geoprobe
