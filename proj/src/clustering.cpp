#include "geoprobe/clustering.hpp"

#include "geoprobe/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <queue>
#include <tuple>

namespace geoprobe {

ClusterSet::ClusterSet(std::shared_ptr<const LabeledPointSet> source, std::vector<Cluster> clusters,
                       SeparabilityConfig config, double epsilon, bool verified)
    : source_(std::move(source)),
      clusters_(std::move(clusters)),
      config_(config),
      epsilon_(epsilon),
      verified_(verified) {
  if (!source_) throw Error(ErrorCode::InvalidArgument, "cluster set needs a source point set");
}

Eigen::MatrixXd ClusterSet::points_of(std::size_t cluster) const {
  return source_->gather(clusters_.at(cluster).members);
}

std::size_t ClusterSet::cluster_of_label(int label) const {
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    if (clusters_[i].label == label) return i;
  }
  throw Error(ErrorCode::EmptyLabel, "no cluster carries label id " + std::to_string(label));
}

namespace {

struct Ball {
  Eigen::VectorXd center;
  double radius = 0.0;
};

Ball bounding_ball(const Eigen::MatrixXd& pts) {
  Ball b;
  b.center = pts.colwise().mean().transpose();
  b.radius = std::sqrt((pts.rowwise() - b.center.transpose()).rowwise().squaredNorm().maxCoeff());
  return b;
}

// Lower bound on the distance between anything inside the two balls.
double ball_gap(const Ball& a, const Ball& b) { return (a.center - b.center).norm() - a.radius - b.radius; }

struct Node {
  int label = 0;
  std::vector<Index> members;
  Eigen::MatrixXd points;
  Ball ball;
  bool alive = true;
};

struct Candidate {
  double distance;
  int label;
  Index lo;  // smaller of the two clusters' first members
  Index hi;
  std::size_t x;
  std::size_t y;
};

struct PopsLater {
  bool operator()(const Candidate& a, const Candidate& b) const {
    return std::tie(a.distance, a.label, a.lo, a.hi) > std::tie(b.distance, b.label, b.lo, b.hi);
  }
};

Candidate make_candidate(const std::vector<Node>& nodes, std::size_t x, std::size_t y) {
  const Index fx = nodes[x].members.front();
  const Index fy = nodes[y].members.front();
  return {(nodes[x].ball.center - nodes[y].ball.center).norm(), nodes[x].label, std::min(fx, fy),
          std::max(fx, fy), x, y};
}

}  // namespace

std::vector<OverlapPair> find_overlapping_pairs(const LabeledPointSet& set, double epsilon) {
  const auto& pts = set.points();
  // Sweep along the widest coordinate: |x_k - y_k| <= |x - y|.
  Index axis = 0;
  (pts.rowwise() - pts.colwise().mean()).colwise().squaredNorm().maxCoeff(&axis);
  std::vector<Index> order(static_cast<std::size_t>(set.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::pair(pts(a, axis), a) < std::pair(pts(b, axis), b);
  });

  std::vector<OverlapPair> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Index a = order[i];
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const Index b = order[j];
      if (pts(b, axis) - pts(a, axis) > epsilon) break;
      if (set.label(a) == set.label(b)) continue;
      const double d = (pts.row(a) - pts.row(b)).norm();
      if (d <= epsilon) out.push_back({std::min(a, b), std::max(a, b), d});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const OverlapPair& l, const OverlapPair& r) { return std::pair(l.first, l.second) < std::pair(r.first, r.second); });
  return out;
}

ClusterSet cluster(std::shared_ptr<const LabeledPointSet> set_ptr, const SeparabilityConfig& cfg,
                   const ClusterOptions& options) {
  cfg.validate();
  if (!set_ptr) throw Error(ErrorCode::InvalidArgument, "null point set");
  const LabeledPointSet& set = *set_ptr;
  const double eps = cfg.resolved_epsilon(set.points());

  if (auto overlaps = find_overlapping_pairs(set, eps); !overlaps.empty()) {
    std::string detail = std::to_string(overlaps.size()) + " cross-label point pair(s) within epsilon, first (" +
                         std::to_string(overlaps.front().first) + ", " + std::to_string(overlaps.front().second) + ")";
    throw IrreducibleOverlapError(detail, std::move(overlaps));
  }

  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(2 * set.size()));
  for (Index r = 0; r < set.size(); ++r) {
    Node n;
    n.label = set.label(r);
    n.members = {r};
    n.points = set.points().row(r);
    n.ball = {set.points().row(r).transpose(), 0.0};
    nodes.push_back(std::move(n));
  }

  std::priority_queue<Candidate, std::vector<Candidate>, PopsLater> queue;
  for (int label = 0; label < set.num_labels(); ++label) {
    const auto rows = set.rows_with_label(label);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        queue.push(make_candidate(nodes, static_cast<std::size_t>(rows[i]), static_cast<std::size_t>(rows[j])));
      }
    }
  }

  while (!queue.empty()) {
    const Candidate c = queue.top();
    queue.pop();
    if (!nodes[c.x].alive || !nodes[c.y].alive) continue;

    Node merged;
    merged.label = c.label;
    std::merge(nodes[c.x].members.begin(), nodes[c.x].members.end(), nodes[c.y].members.begin(),
               nodes[c.y].members.end(), std::back_inserter(merged.members));
    merged.points = set.gather(merged.members);
    merged.ball = bounding_ball(merged.points);

    std::vector<std::pair<double, std::size_t>> rivals;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k].alive || nodes[k].label == c.label) continue;
      const double gap = ball_gap(merged.ball, nodes[k].ball);
      if (gap <= eps) rivals.emplace_back(gap, k);
    }
    std::sort(rivals.begin(), rivals.end());

    std::atomic<bool> rejected{false};
    parallel_for(rivals.size(), options.threads, [&](std::size_t i) {
      if (rejected.load(std::memory_order_relaxed)) return;
      if (!hulls_farther_than(merged.points, nodes[rivals[i].second].points, eps, cfg)) rejected = true;
    });
    if (rejected) continue;

    nodes[c.x].alive = false;
    nodes[c.y].alive = false;
    nodes[c.x].points.resize(0, 0);
    nodes[c.y].points.resize(0, 0);
    const std::size_t id = nodes.size();
    nodes.push_back(std::move(merged));
    for (std::size_t k = 0; k < id; ++k) {
      if (nodes[k].alive && nodes[k].label == c.label) queue.push(make_candidate(nodes, k, id));
    }
  }

  std::vector<Cluster> clusters;
  for (auto& n : nodes) {
    if (n.alive) clusters.push_back({n.label, std::move(n.members)});
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    return std::pair(a.label, a.members.front()) < std::pair(b.label, b.members.front());
  });

  ClusterSet provisional(set_ptr, std::move(clusters), cfg, eps, false);
  const bool verified = check_contract(provisional, options.threads).ok();
  return ClusterSet(std::move(set_ptr), provisional.clusters(), cfg, eps, verified);
}

ClusterSet cluster(const LabeledPointSet& set, const SeparabilityConfig& cfg, const ClusterOptions& options) {
  return cluster(std::make_shared<const LabeledPointSet>(set), cfg, options);
}

std::size_t count_clusters(const ClusterSet& cs) { return cs.clusters().size(); }

bool is_linear(const ClusterSet& cs) {
  return count_clusters(cs) == static_cast<std::size_t>(cs.source().num_labels());
}

ContractReport check_contract(const ClusterSet& cs, unsigned threads) {
  ContractReport report;
  const auto& set = cs.source();
  const auto& clusters = cs.clusters();

  std::vector<int> seen(static_cast<std::size_t>(set.size()), 0);
  for (const auto& c : clusters) {
    for (Index m : c.members) {
      if (m < 0 || m >= set.size()) {
        ++report.coverage_violations;
        continue;
      }
      ++seen[static_cast<std::size_t>(m)];
      if (set.label(m) != c.label) ++report.purity_violations;
    }
  }
  for (int s : seen) {
    if (s != 1) ++report.coverage_violations;
  }
  if (report.coverage_violations > 0) return report;

  std::vector<Eigen::MatrixXd> points;
  std::vector<Ball> balls;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    points.push_back(cs.points_of(i));
    balls.push_back(bounding_ball(points.back()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t j = i + 1; j < clusters.size(); ++j) {
      if (clusters[i].label == clusters[j].label) continue;
      if (ball_gap(balls[i], balls[j]) > cs.epsilon()) continue;
      pairs.emplace_back(i, j);
    }
  }
  std::vector<char> violated(pairs.size(), 0);
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    violated[k] = !hulls_farther_than(points[i], points[j], cs.epsilon(), cs.config());
  });
  report.disjointness_violations = static_cast<std::size_t>(std::count(violated.begin(), violated.end(), 1));
  return report;
}

void to_json(nlohmann::json& j, const SeparabilityConfig& cfg) {
  j = {{"epsilon", cfg.epsilon},
       {"gap_tol", cfg.gap_tol},
       {"max_iterations", cfg.max_iterations},
       {"relative_eps", cfg.relative_eps}};
}

void to_json(nlohmann::json& j, const ClusterSet& cs) {
  const auto& set = cs.source();
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : cs.clusters()) {
    clusters.push_back({{"label", set.label_name(c.label)}, {"label_id", c.label}, {"members", c.members}});
  }
  j = {{"label_names", set.label_names()},
       {"num_points", set.size()},
       {"num_labels", set.num_labels()},
       {"num_clusters", count_clusters(cs)},
       {"is_linear", is_linear(cs)},
       {"config", cs.config()},
       {"resolved_epsilon", cs.epsilon()},
       {"verified", cs.verified()},
       {"clusters", std::move(clusters)}};
}

}  // namespace geoprobe
