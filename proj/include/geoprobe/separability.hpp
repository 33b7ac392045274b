#pragma once

#include "geoprobe/error.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace geoprobe {

using PointsRef = Eigen::Ref<const Eigen::MatrixXd>;

struct SeparabilityConfig {
  /// Hulls closer than this are treated as overlapping.
  double epsilon = 1e-6;
  /// Frank-Wolfe duality-gap tolerance, measured relative to the squared
  /// radius of the combined point cloud so results do not depend on units.
  double gap_tol = 1e-8;
  /// 0 selects max(10000, 100 * (|A| + |B|)).
  std::int64_t max_iterations = 0;
  /// Multiply epsilon by the mean point norm of the data being analysed.
  bool relative_eps = false;

  void validate() const;
  std::int64_t iteration_budget(Eigen::Index na, Eigen::Index nb) const;
  /// The absolute overlap threshold for points drawn from `points`.
  double resolved_epsilon(const PointsRef& points) const;
  double resolved_epsilon(const PointsRef& a, const PointsRef& b) const;
};

struct NearestPoints {
  double distance = 0.0;
  Eigen::VectorXd witness_a;
  Eigen::VectorXd witness_b;
  /// Final Frank-Wolfe duality gap (in squared-distance units).
  double gap = 0.0;
  /// Certified lower bound on the hull distance from the final iterate.
  double lower_bound = 0.0;
  std::int64_t iterations = 0;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& detail, NearestPoints best)
      : Error(ErrorCode::NoConvergence, detail), best_(std::move(best)) {}
  const NearestPoints& best() const noexcept { return best_; }

 private:
  NearestPoints best_;
};

/// Unit-normal hyperplane {x : normal.x + offset = 0}; points of the first set
/// lie on the positive side.
struct Hyperplane {
  Eigen::VectorXd normal;
  double offset = 0.0;
  double margin = 0.0;

  double signed_distance(const Eigen::Ref<const Eigen::VectorXd>& x) const { return normal.dot(x) + offset; }
};

/// Minimum Euclidean distance between conv(rows of a) and conv(rows of b).
/// Symmetric in its arguments bit for bit.
NearestPoints hull_distance(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg = {});

/// hull_distance(a, b) > epsilon. Stops as soon as the certified bounds settle
/// the comparison, so it is usually much cheaper than hull_distance.
bool is_separable(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg = {});

/// Same as is_separable but against an explicit absolute threshold.
bool hulls_farther_than(const PointsRef& a, const PointsRef& b, double threshold,
                        const SeparabilityConfig& cfg = {});

/// Hard-margin separator bisecting the nearest-point segment.
Hyperplane max_margin_separator(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg = {});

}  // namespace geoprobe
