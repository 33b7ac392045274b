#pragma once

#include "geoprobe/dataset.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/separability.hpp"

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <utility>
#include <vector>

namespace geoprobe {

struct Cluster {
  int label = 0;
  /// Sorted row indices into the source point set.
  std::vector<Index> members;
};

/// Label-pure clusters whose convex hulls are pairwise more than epsilon
/// apart whenever their labels differ. Members partition the source rows.
class ClusterSet {
 public:
  ClusterSet(std::shared_ptr<const LabeledPointSet> source, std::vector<Cluster> clusters,
             SeparabilityConfig config, double epsilon, bool verified);

  const LabeledPointSet& source() const noexcept { return *source_; }
  const std::shared_ptr<const LabeledPointSet>& source_ptr() const noexcept { return source_; }
  const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
  const SeparabilityConfig& config() const noexcept { return config_; }
  /// The absolute overlap threshold actually applied.
  double epsilon() const noexcept { return epsilon_; }
  /// Result of the post-hoc pairwise disjointness re-check.
  bool verified() const noexcept { return verified_; }

  Eigen::MatrixXd points_of(std::size_t cluster) const;
  /// Index of the single cluster carrying `label`; only meaningful when linear.
  std::size_t cluster_of_label(int label) const;

 private:
  std::shared_ptr<const LabeledPointSet> source_;
  std::vector<Cluster> clusters_;
  SeparabilityConfig config_;
  double epsilon_;
  bool verified_;
};

struct OverlapPair {
  Index first = 0;
  Index second = 0;
  double distance = 0.0;
};

class IrreducibleOverlapError : public Error {
 public:
  IrreducibleOverlapError(const std::string& detail, std::vector<OverlapPair> pairs)
      : Error(ErrorCode::IrreducibleOverlap, detail), pairs_(std::move(pairs)) {}
  const std::vector<OverlapPair>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<OverlapPair> pairs_;
};

struct ClusterOptions {
  /// Worker threads for the separability checks inside one merge step.
  unsigned threads = 1;
};

/// Cross-label row pairs no farther apart than epsilon, sorted.
std::vector<OverlapPair> find_overlapping_pairs(const LabeledPointSet& set, double epsilon);

/// Greedy agglomeration from singletons. Same-label pairs are tried closest
/// centroids first and merged only if the merged hull stays epsilon-disjoint
/// from every cluster of another label.
ClusterSet cluster(std::shared_ptr<const LabeledPointSet> set, const SeparabilityConfig& cfg = {},
                   const ClusterOptions& options = {});
ClusterSet cluster(const LabeledPointSet& set, const SeparabilityConfig& cfg = {},
                   const ClusterOptions& options = {});

std::size_t count_clusters(const ClusterSet& cs);
bool is_linear(const ClusterSet& cs);

/// Purity, coverage, and pairwise hull disjointness, checked from scratch.
struct ContractReport {
  std::size_t purity_violations = 0;
  std::size_t coverage_violations = 0;
  std::size_t disjointness_violations = 0;
  bool ok() const { return purity_violations + coverage_violations + disjointness_violations == 0; }
};
ContractReport check_contract(const ClusterSet& cs, unsigned threads = 1);

void to_json(nlohmann::json& j, const ClusterSet& cs);
void to_json(nlohmann::json& j, const SeparabilityConfig& cfg);

}  // namespace geoprobe
