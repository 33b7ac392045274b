#include "geoprobe/separability.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace geoprobe {

void SeparabilityConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(gap_tol > 0.0) || !std::isfinite(gap_tol)) throw Error(ErrorCode::InvalidArgument, "gap_tol must be positive");
  if (max_iterations < 0) throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive (or 0 for auto)");
}

std::int64_t SeparabilityConfig::iteration_budget(Eigen::Index na, Eigen::Index nb) const {
  if (max_iterations > 0) return max_iterations;
  return std::max<std::int64_t>(10000, 100 * static_cast<std::int64_t>(na + nb));
}

double SeparabilityConfig::resolved_epsilon(const PointsRef& points) const {
  if (!relative_eps || points.rows() == 0) return epsilon;
  return epsilon * points.rowwise().norm().mean();
}

double SeparabilityConfig::resolved_epsilon(const PointsRef& a, const PointsRef& b) const {
  if (!relative_eps) return epsilon;
  const double total = a.rowwise().norm().sum() + b.rowwise().norm().sum();
  return epsilon * total / static_cast<double>(a.rows() + b.rows());
}

namespace {

enum class Verdict { Converged, Above, AtOrBelow };

// Order-independent choice of which set plays "A", so swapping the arguments
// replays exactly the same floating-point computation.
bool comes_before(const PointsRef& a, const PointsRef& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (a(r, c) != b(r, c)) return a(r, c) < b(r, c);
    }
  }
  return true;
}

// Nearest points of conv(A) and conv(B) as the minimiser of
// 1/2 |A^T alpha - B^T beta|^2 over the product of two probability simplices.
class NearestPointSolver {
 public:
  NearestPointSolver(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg) : cfg_(cfg) {
    const auto total = static_cast<double>(a.rows() + b.rows());
    center_ = (a.colwise().sum() + b.colwise().sum()).transpose() / total;
    a_ = a.rowwise() - center_.transpose();
    b_ = b.rowwise() - center_.transpose();
    const double scale2 = std::max(a_.rowwise().squaredNorm().maxCoeff(), b_.rowwise().squaredNorm().maxCoeff());
    tol_ = cfg.gap_tol * scale2;
    budget_ = cfg.iteration_budget(a.rows(), b.rows());

    Eigen::Index j0 = 0;
    Eigen::Index i0 = 0;
    (b_.rowwise() - a_.row(0)).rowwise().squaredNorm().minCoeff(&j0);
    (a_.rowwise() - b_.row(j0)).rowwise().squaredNorm().minCoeff(&i0);
    alpha_ = Eigen::VectorXd::Zero(a_.rows());
    beta_ = Eigen::VectorXd::Zero(b_.rows());
    alpha_[i0] = 1.0;
    beta_[j0] = 1.0;
    p_ = a_.row(i0).transpose();
    q_ = b_.row(j0).transpose();
  }

  Verdict run(std::optional<double> threshold) {
    bool stalled = false;
    for (iterations_ = 0;; ++iterations_) {
      evaluate();
      if (threshold) {
        if (upper_ <= *threshold) return Verdict::AtOrBelow;
        if (lower_ > *threshold) return Verdict::Above;
      }
      if (gap_ <= tol_ || stalled) {
        if (polish()) {
          stalled = false;
          continue;
        }
        if (gap_ <= tol_) return Verdict::Converged;
        throw NoConvergenceError("line search stalled with gap " + std::to_string(gap_), result());
      }
      if (iterations_ >= budget_) {
        throw NoConvergenceError("no convergence after " + std::to_string(iterations_) +
                                     " iterations, gap " + std::to_string(gap_),
                                 result());
      }
      if (iterations_ > 0 && iterations_ % 64 == 0 && polish()) continue;
      stalled = !step();
      if (iterations_ % 256 == 255) resync();
    }
  }

  NearestPoints result() {
    resync();
    evaluate();
    NearestPoints out;
    out.distance = upper_;
    out.witness_a = p_ + center_;
    out.witness_b = q_ + center_;
    out.gap = gap_;
    out.lower_bound = std::min(lower_, upper_);
    out.iterations = iterations_;
    return out;
  }

 private:
  void evaluate() {
    z_ = p_ - q_;
    ga_.noalias() = a_ * z_;
    gb_.noalias() = b_ * z_;
    const double zp = alpha_.dot(ga_);
    const double zq = beta_.dot(gb_);
    ga_.minCoeff(&i_fw_);
    gb_.maxCoeff(&j_fw_);
    gap_ = std::max(0.0, (zp - ga_[i_fw_]) + (gb_[j_fw_] - zq));

    i_aw_ = -1;
    j_aw_ = -1;
    for (Eigen::Index i = 0; i < alpha_.size(); ++i) {
      if (alpha_[i] > 0.0 && (i_aw_ < 0 || ga_[i] > ga_[i_aw_])) i_aw_ = i;
    }
    for (Eigen::Index j = 0; j < beta_.size(); ++j) {
      if (beta_[j] > 0.0 && (j_aw_ < 0 || gb_[j] < gb_[j_aw_])) j_aw_ = j;
    }
    away_gap_ = (ga_[i_aw_] - zp) + (zq - gb_[j_aw_]);

    upper_ = z_.norm();
    lower_ = upper_ > 0.0 ? std::max(0.0, (ga_[i_fw_] - gb_[j_fw_]) / upper_) : 0.0;
  }

  // One away-step Frank-Wolfe iteration with exact line search. Returns false
  // if no progress was possible.
  bool step() {
    const bool toward = gap_ >= away_gap_;
    Eigen::VectorXd dz;
    double max_step = 1.0;
    if (toward) {
      dz = (a_.row(i_fw_) - b_.row(j_fw_)).transpose() - z_;
    } else {
      dz = z_ - (a_.row(i_aw_) - b_.row(j_aw_)).transpose();
      max_step = std::numeric_limits<double>::infinity();
      if (alpha_[i_aw_] < 1.0) max_step = std::min(max_step, alpha_[i_aw_] / (1.0 - alpha_[i_aw_]));
      if (beta_[j_aw_] < 1.0) max_step = std::min(max_step, beta_[j_aw_] / (1.0 - beta_[j_aw_]));
    }
    const double dd = dz.squaredNorm();
    if (!(dd > 0.0)) return false;
    const double gamma = std::clamp(-z_.dot(dz) / dd, 0.0, max_step);
    if (!(gamma > 0.0)) return false;

    if (toward) {
      alpha_ *= 1.0 - gamma;
      beta_ *= 1.0 - gamma;
      alpha_[i_fw_] += gamma;
      beta_[j_fw_] += gamma;
      p_ = (1.0 - gamma) * p_ + gamma * a_.row(i_fw_).transpose();
      q_ = (1.0 - gamma) * q_ + gamma * b_.row(j_fw_).transpose();
    } else {
      const bool drop_a = alpha_[i_aw_] < 1.0 && gamma >= alpha_[i_aw_] / (1.0 - alpha_[i_aw_]);
      const bool drop_b = beta_[j_aw_] < 1.0 && gamma >= beta_[j_aw_] / (1.0 - beta_[j_aw_]);
      alpha_ *= 1.0 + gamma;
      beta_ *= 1.0 + gamma;
      alpha_[i_aw_] -= gamma;
      beta_[j_aw_] -= gamma;
      if (drop_a) alpha_[i_aw_] = 0.0;
      if (drop_b) beta_[j_aw_] = 0.0;
      alpha_ = alpha_.cwiseMax(0.0);
      beta_ = beta_.cwiseMax(0.0);
      p_ = (1.0 + gamma) * p_ - gamma * a_.row(i_aw_).transpose();
      q_ = (1.0 + gamma) * q_ - gamma * b_.row(j_aw_).transpose();
    }
    return true;
  }

  void resync() {
    alpha_ /= alpha_.sum();
    beta_ /= beta_.sum();
    p_.noalias() = a_.transpose() * alpha_;
    q_.noalias() = b_.transpose() * beta_;
  }

  // Fully corrective step: minimise exactly over the affine hulls of the
  // current supports and keep the result if it stays feasible and improves.
  bool polish() {
    std::vector<Eigen::Index> sa, sb;
    for (Eigen::Index i = 0; i < alpha_.size(); ++i) {
      if (alpha_[i] > 0.0) sa.push_back(i);
    }
    for (Eigen::Index j = 0; j < beta_.size(); ++j) {
      if (beta_[j] > 0.0) sb.push_back(j);
    }
    if (sa == polished_a_ && sb == polished_b_) return false;
    polished_a_ = sa;
    polished_b_ = sb;
    const auto ma = static_cast<Eigen::Index>(sa.size());
    const auto mb = static_cast<Eigen::Index>(sb.size());
    const Eigen::Index m = ma + mb;
    if (m > 320 || m < 3) return false;

    Eigen::MatrixXd cols(a_.cols(), m);
    for (Eigen::Index k = 0; k < ma; ++k) cols.col(k) = a_.row(sa[static_cast<std::size_t>(k)]).transpose();
    for (Eigen::Index k = 0; k < mb; ++k) cols.col(ma + k) = -b_.row(sb[static_cast<std::size_t>(k)]).transpose();

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 2, m + 2);
    kkt.topLeftCorner(m, m).noalias() = cols.transpose() * cols;
    kkt.block(m, 0, 1, ma).setOnes();
    kkt.block(m + 1, ma, 1, mb).setOnes();
    kkt.block(0, m, ma, 1).setOnes();
    kkt.block(ma, m + 1, mb, 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 2);
    rhs[m] = 1.0;
    rhs[m + 1] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd x = sol.head(m);
    if (!x.allFinite() || x.minCoeff() < -1e-12) return false;
    x = x.cwiseMax(0.0);
    const double suma = x.head(ma).sum();
    const double sumb = x.tail(mb).sum();
    if (!(suma > 0.0) || !(sumb > 0.0)) return false;

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(alpha_.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(beta_.size());
    for (Eigen::Index k = 0; k < ma; ++k) alpha[sa[static_cast<std::size_t>(k)]] = x[k] / suma;
    for (Eigen::Index k = 0; k < mb; ++k) beta[sb[static_cast<std::size_t>(k)]] = x[ma + k] / sumb;
    Eigen::VectorXd p = a_.transpose() * alpha;
    Eigen::VectorXd q = b_.transpose() * beta;
    if (!((p - q).squaredNorm() <= (p_ - q_).squaredNorm())) return false;
    alpha_ = std::move(alpha);
    beta_ = std::move(beta);
    p_ = std::move(p);
    q_ = std::move(q);
    return true;
  }

  const SeparabilityConfig& cfg_;
  Eigen::VectorXd center_;
  Eigen::MatrixXd a_, b_;
  Eigen::VectorXd alpha_, beta_, p_, q_, z_, ga_, gb_;
  Eigen::Index i_fw_ = 0, j_fw_ = 0, i_aw_ = 0, j_aw_ = 0;
  double gap_ = 0.0, away_gap_ = 0.0, upper_ = 0.0, lower_ = 0.0, tol_ = 0.0;
  std::int64_t budget_ = 0;
  std::int64_t iterations_ = 0;
  std::vector<Eigen::Index> polished_a_, polished_b_;
};

void check_inputs(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg) {
  cfg.validate();
  if (a.rows() == 0 || b.rows() == 0) throw Error(ErrorCode::EmptySet, "both point sets must be nonempty");
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.cols()));
  }
}

}  // namespace

NearestPoints hull_distance(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg) {
  check_inputs(a, b, cfg);
  const bool ordered = comes_before(a, b);
  NearestPointSolver solver(ordered ? a : b, ordered ? b : a, cfg);
  try {
    solver.run(std::nullopt);
  } catch (const NoConvergenceError& e) {
    if (ordered) throw;
    NearestPoints best = e.best();
    std::swap(best.witness_a, best.witness_b);
    throw NoConvergenceError("no convergence, gap " + std::to_string(best.gap), std::move(best));
  }
  NearestPoints out = solver.result();
  if (!ordered) std::swap(out.witness_a, out.witness_b);
  return out;
}

bool hulls_farther_than(const PointsRef& a, const PointsRef& b, double threshold, const SeparabilityConfig& cfg) {
  check_inputs(a, b, cfg);
  const bool ordered = comes_before(a, b);
  NearestPointSolver solver(ordered ? a : b, ordered ? b : a, cfg);
  switch (solver.run(threshold)) {
    case Verdict::Above: return true;
    case Verdict::AtOrBelow: return false;
    case Verdict::Converged: break;
  }
  return solver.result().distance > threshold;
}

bool is_separable(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg) {
  check_inputs(a, b, cfg);
  return hulls_farther_than(a, b, cfg.resolved_epsilon(a, b), cfg);
}

Hyperplane max_margin_separator(const PointsRef& a, const PointsRef& b, const SeparabilityConfig& cfg) {
  const NearestPoints np = hull_distance(a, b, cfg);
  const double eps = cfg.resolved_epsilon(a, b);
  if (!(np.distance > eps)) {
    throw Error(ErrorCode::NotSeparable, "hull distance " + std::to_string(np.distance) +
                                             " does not exceed epsilon " + std::to_string(eps));
  }
  Hyperplane h;
  h.normal = (np.witness_a - np.witness_b) / np.distance;
  h.offset = -h.normal.dot(0.5 * (np.witness_a + np.witness_b));
  h.margin = 0.5 * np.distance;
  return h;
}

}  // namespace geoprobe
