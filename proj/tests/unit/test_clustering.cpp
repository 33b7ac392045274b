#include "geoprobe/analytics.hpp"
#include "geoprobe/clustering.hpp"

#include "support/qp_oracle.hpp"
#include "support/synth.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <set>

using namespace geoprobe;

namespace {

/// No two clusters of one label can be merged without touching another label.
void check_maximal(const ClusterSet& cs) {
  const auto& cl = cs.clusters();
  for (std::size_t i = 0; i < cl.size(); ++i) {
    for (std::size_t j = i + 1; j < cl.size(); ++j) {
      if (cl[i].label != cl[j].label) continue;
      Eigen::MatrixXd merged(cl[i].members.size() + cl[j].members.size(), cs.source().dim());
      merged << cs.points_of(i), cs.points_of(j);
      bool blocked = false;
      for (std::size_t k = 0; k < cl.size() && !blocked; ++k) {
        if (cl[k].label == cl[i].label) continue;
        blocked = oracle::hull_distance_qp(merged, cs.points_of(k)).distance <= cs.epsilon() + 1e-7;
      }
      CHECK_MESSAGE(blocked, "clusters " << i << " and " << j << " could have been merged");
    }
  }
}

}  // namespace

TEST_CASE("three separated blobs give three clusters") {
  const auto set = synth::blobs(synth::spread_centers(3, 2, 10.0), 20, 1.0, 1);
  const auto cs = cluster(set);
  CHECK(count_clusters(cs) == 3);
  CHECK(is_linear(cs));
  CHECK(cs.verified());
  CHECK(check_contract(cs).ok());
}

TEST_CASE("XOR layout needs four clusters") {
  const auto set = synth::xor_layout(10, 4.0, 1.8, 2);
  // Neither label's full hull avoids the other's.
  const auto x = set.gather(set.rows_with_label(*set.find_label("X")));
  const auto o = set.gather(set.rows_with_label(*set.find_label("O")));
  CHECK(oracle::hull_distance_qp(x, o).distance <= 1e-6);

  const auto cs = cluster(set);
  CHECK(count_clusters(cs) == 4);
  CHECK_FALSE(is_linear(cs));
  CHECK(check_contract(cs).ok());
  check_maximal(cs);
  for (const auto& c : cs.clusters()) CHECK(c.members.size() == 10);
}

TEST_CASE("narrow XOR blobs let one label merge along its diagonal") {
  const auto set = synth::xor_layout(10, 4.0, 0.5, 2);
  const auto cs = cluster(set);
  CHECK(count_clusters(cs) == 3);
  CHECK_FALSE(is_linear(cs));
  CHECK(check_contract(cs).ok());
  check_maximal(cs);
}

TEST_CASE("identical cross-label points are irreducible") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 1, 0, 0;
  const std::vector<std::string> names{"a", "a", "b"};
  const auto set = LabeledPointSet::from_row_labels(pts, names);
  try {
    cluster(set);
    FAIL("expected IrreducibleOverlapError");
  } catch (const IrreducibleOverlapError& e) {
    CHECK(e.code() == ErrorCode::IrreducibleOverlap);
    REQUIRE(e.pairs().size() == 1);
    CHECK(e.pairs()[0].first == 0);
    CHECK(e.pairs()[0].second == 2);
    CHECK(e.pairs()[0].distance == 0.0);
  }
}

TEST_CASE("seventeen separable labels give seventeen clusters") {
  const auto set = synth::blobs(synth::spread_centers(17, 3, 30.0), 8, 1.0, 4);
  const auto cs = cluster(set);
  CHECK(count_clusters(cs) == 17);
  CHECK(is_linear(cs));
  CHECK(distance_vector(cs).size() == 136);
}

TEST_CASE("single label gives one cluster") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd pts = synth::uniform_box(rng, 12, 3, 0, 1);
  const std::vector<std::string> names(12, "only");
  const auto cs = cluster(LabeledPointSet::from_row_labels(pts, names));
  CHECK(count_clusters(cs) == 1);
  CHECK(is_linear(cs));
}

TEST_CASE("alternating chain splits into runs") {
  const auto set = synth::alternating_chain(2, 3, 4, 8);
  const auto cs = cluster(set);
  CHECK(count_clusters(cs) == 6);
  CHECK(check_contract(cs).ok());
  check_maximal(cs);
}

TEST_CASE("clustering the centroids of a linear result is idempotent") {
  const auto set = synth::blobs(synth::spread_centers(5, 2, 8.0), 15, 1.0, 6);
  const auto cs = cluster(set);
  REQUIRE(is_linear(cs));
  Eigen::MatrixXd cents(set.num_labels(), set.dim());
  std::vector<int> ids;
  for (int l = 0; l < set.num_labels(); ++l) {
    cents.row(l) = centroid(set, l).transpose();
    ids.push_back(l);
  }
  const auto again = cluster(LabeledPointSet(cents, ids, set.label_names()));
  CHECK(count_clusters(again) == static_cast<std::size_t>(set.num_labels()));
}

TEST_CASE("radial push never increases the cluster count") {
  // Overlapping start: blob radius larger than half the center spacing.
  const Eigen::MatrixXd centers = synth::spread_centers(4, 2, 1.0);
  const auto base = synth::blobs(centers, 12, 1.2, 12);
  std::size_t previous = static_cast<std::size_t>(base.size());
  for (int step = 0; step <= 6; ++step) {
    const auto pushed = synth::radial_push(base, centers, 0.5, step);
    const auto cs = cluster(pushed);
    CHECK(check_contract(cs).ok());
    CHECK(count_clusters(cs) <= previous);
    previous = count_clusters(cs);
  }
  CHECK(previous == 4);
}

TEST_CASE("output is deterministic and independent of thread count") {
  const auto set = synth::xor_layout(12, 3.0, 1.0, 5);
  const auto a = cluster(set, {}, {1});
  const auto b = cluster(set, {}, {4});
  REQUIRE(a.clusters().size() == b.clusters().size());
  for (std::size_t i = 0; i < a.clusters().size(); ++i) {
    CHECK(a.clusters()[i].label == b.clusters()[i].label);
    CHECK(a.clusters()[i].members == b.clusters()[i].members);
  }
  CHECK(nlohmann::json(a).dump() == nlohmann::json(b).dump());
}

TEST_CASE("json output carries the verification flag and members") {
  const auto set = synth::blobs(synth::spread_centers(3, 2, 10.0), 4, 1.0, 1);
  const nlohmann::json j = cluster(set);
  CHECK(j.at("verified").get<bool>());
  CHECK(j.at("num_clusters").get<int>() == 3);
  CHECK(j.at("is_linear").get<bool>());
  CHECK(j.at("clusters").size() == 3);
  std::set<int> rows;
  for (const auto& c : j.at("clusters")) {
    for (int m : c.at("members")) rows.insert(m);
  }
  CHECK(rows.size() == 12);
  CHECK(j.at("config").at("epsilon").get<double>() == 1e-6);
}

TEST_CASE("check_contract detects a broken partition") {
  const auto set = std::make_shared<const LabeledPointSet>(synth::xor_layout(3, 4.0, 0.5, 2));
  const int x = *set->find_label("X"), o = *set->find_label("O");
  // Whole labels as single clusters overlap each other.
  const ClusterSet bad(set, {{o, set->rows_with_label(o)}, {x, set->rows_with_label(x)}}, {}, 1e-6, false);
  const auto report = check_contract(bad);
  CHECK(report.disjointness_violations == 1);
  CHECK(report.purity_violations == 0);
  CHECK(report.coverage_violations == 0);

  std::vector<Index> rows = set->rows_with_label(o);
  rows.pop_back();
  const ClusterSet partial(set, {{o, rows}, {x, set->rows_with_label(x)}}, {}, 1e-6, false);
  CHECK(check_contract(partial).coverage_violations > 0);
}
