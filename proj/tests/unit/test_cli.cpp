#include "geoprobe/analytics.hpp"
#include "geoprobe/cli.hpp"

#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <map>
#include <sstream>

using namespace geoprobe;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) { return json::parse(testutil::slurp(p)); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = testutil::slurp(e.path());
  return files;
}

struct Fixture {
  testutil::TempDir data{"gp-cli-data"};
  Fixture() { fixtures::write_all(data.path()); }
  std::string in(const std::string& name) const { return (data / name).string(); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "cluster command") {
  testutil::TempDir out;
  auto r = run_cli({"--out", out.path().string(), "--threads", "2", "cluster", in("blobs.embv"), in("blobs.tsv")});
  REQUIRE(r.code == 0);
  const auto j = read_json(out / "clusters.json");
  CHECK(j.at("num_clusters") == 3);
  CHECK(j.at("verified") == true);
  CHECK(read_json(out / "summary.json").at("is_linear") == true);
  CHECK(testutil::slurp(out / "clusters.csv").rfind("row,label,cluster\n", 0) == 0);

  r = run_cli({"--out", out.path().string(), "cluster", in("xor.embv"), in("xor.tsv")});
  REQUIRE(r.code == 0);
  CHECK(read_json(out / "summary.json").at("is_linear") == false);
  CHECK(read_json(out / "summary.json").at("num_clusters") == 4);

  r = run_cli({"--out", out.path().string(), "cluster", in("dup.embv"), in("dup.tsv")});
  CHECK(r.code == 2);
  CHECK(r.err.find("IrreducibleOverlap") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "distances command") {
  testutil::TempDir out;
  REQUIRE(run_cli({"--out", out.path().string(), "distances", in("blobs.embv"), in("blobs.tsv")}).code == 0);
  auto j = read_json(out / "distances.json");
  CHECK(j.at("linear") == true);
  CHECK(j.at("distance_vector").at("values").size() == 3);
  CHECK(j.at("min_distances").size() == 3);
  CHECK(fs::exists(out / "min_distances.csv"));

  testutil::TempDir out2;
  REQUIRE(run_cli({"--out", out2.path().string(), "distances", in("xor.embv"), in("xor.tsv")}).code == 0);
  j = read_json(out2 / "distances.json");
  CHECK(j.at("linear") == false);
  CHECK_FALSE(j.contains("distance_vector"));
  CHECK(j.at("note").get<std::string>().rfind("NotLinear", 0) == 0);
  CHECK(fs::exists(out2 / "distance_matrix.csv"));
  CHECK_FALSE(fs::exists(out2 / "min_distances.csv"));

  REQUIRE(run_cli({"--out", out2.path().string(), "distances", in("two.embv"), in("two.tsv")}).code == 0);
  CHECK(read_json(out2 / "distances.json").at("distance_vector").at("values").size() == 1);
}

TEST_CASE_FIXTURE(Fixture, "similarity command") {
  testutil::TempDir out;
  auto r = run_cli({"--out", out.path().string(), "similarity", in("blobs.embv"), in("blobs.tsv"), in("blobs.embv"),
                    in("blobs.tsv")});
  REQUIRE(r.code == 0);
  CHECK(read_json(out / "similarity.json").at("similarity") == 1.0);
  CHECK(r.out == "similarity: 1\n");

  r = run_cli({"--out", out.path().string(), "similarity", in("blobs.embv"), in("blobs.tsv"), in("blobs2x.embv"),
               in("blobs2x.tsv")});
  REQUIRE(r.code == 0);
  CHECK(std::abs(read_json(out / "similarity.json").at("similarity").get<double>() - 1.0) <= 1e-9);

  r = run_cli({"--out", out.path().string(), "similarity", in("blobs.embv"), in("blobs.tsv"), in("xor.embv"),
               in("xor.tsv")});
  CHECK(r.code == 2);
}

TEST_CASE_FIXTURE(Fixture, "similarity of a shuffled-label copy matches a direct rerun") {
  const auto set = load_point_set(in("blobs.embv"), in("blobs.tsv"));
  // Permute whole labels so the copy stays separable but its geometry differs.
  const std::vector<int> perm{2, 0, 1};
  std::vector<int> labels;
  for (int l : set.labels()) labels.push_back(perm[static_cast<std::size_t>(l)]);
  const LabeledPointSet relabeled(set.points(), labels, set.label_names());
  fixtures::save(relabeled, data.path(), "relabeled");

  testutil::TempDir out;
  REQUIRE(run_cli({"--out", out.path().string(), "similarity", in("blobs.embv"), in("blobs.tsv"), in("relabeled.embv"),
                   in("relabeled.tsv")})
              .code == 0);
  const double expected =
      spatial_similarity(distance_vector(cluster(set)), distance_vector(cluster(relabeled)));
  CHECK(read_json(out / "similarity.json").at("similarity").get<double>() == expected);
}

TEST_CASE_FIXTURE(Fixture, "track command") {
  testutil::TempDir out;
  auto r = run_cli({"--out", out.path().string(), "track", in("radial")});
  REQUIRE(r.code == 0);
  const auto j = read_json(out / "track.json");
  REQUIRE(j.at("steps").size() == 10);
  for (std::size_t k = 1; k < 10; ++k) {
    const auto& prev = j["steps"][k - 1]["min_distances"];
    const auto& cur = j["steps"][k]["min_distances"];
    REQUIRE(prev.size() == 8);
    for (const auto& [label, value] : prev.items()) CHECK(cur.at(label).get<double>() >= value.get<double>());
  }
  for (const char* f : {"track.csv", "min_distances.svg", "similarity.svg", "centroid_paths.svg"}) CHECK(fs::exists(out / f));
  // 3 + 3 of 8 labels in the min-distance plot.
  const auto svg = testutil::slurp(out / "min_distances.svg");
  std::size_t legends = 0;
  for (auto pos = svg.find("width=\"10\" height=\"10\""); pos != std::string::npos;
       pos = svg.find("width=\"10\" height=\"10\"", pos + 1))
    ++legends;
  CHECK(legends == 6);

  testutil::TempDir out2;
  REQUIRE(run_cli({"--out", out2.path().string(), "--format", "json", "track", in("scaling")}).code == 0);
  for (const auto& s : read_json(out2 / "track.json").at("steps")) {
    CHECK(std::abs(s.at("similarity_to_origin").get<double>() - 1.0) <= 1e-9);
  }
  CHECK_FALSE(fs::exists(out2 / "track.csv"));
  CHECK_FALSE(fs::exists(out2 / "similarity.svg"));
}

TEST_CASE_FIXTURE(Fixture, "crosstask command") {
  testutil::TempDir out;
  auto r = run_cli({"--out", out.path().string(), "crosstask", in("blobs.embv"), in("blobs.tsv"), in("blobs2x.embv"),
                    in("blobs2x.tsv")});
  REQUIRE(r.code == 0);
  const auto j = read_json(out / "crosstask.json");
  CHECK(j.at("num_increased") == 3);
  CHECK(j.at("num_decreased") == 0);
  CHECK(r.out.rfind("#inc: 3\n#dec: 0\naverage inc: ", 0) == 0);
  CHECK(fs::exists(out / "crosstask_summary.csv"));

  r = run_cli({"--out", out.path().string(), "crosstask", in("blobs.embv"), in("blobs.tsv"), in("xor.embv"),
               in("xor.tsv")});
  CHECK(r.code == 1);
}

TEST_CASE_FIXTURE(Fixture, "probe command") {
  testutil::TempDir out;
  auto r = run_cli({"--out", out.path().string(), "--seed", "3", "probe", "--hidden1", "32", "--hidden2", "32,64",
                    "--reg-weights", "1e-4", "--probe-seeds", "2", "--epochs", "300", in("blobs.embv"), in("blobs.tsv"),
                    in("blobs.embv"), in("blobs.tsv")});
  REQUIRE(r.code == 0);
  const auto j = read_json(out / "probe.json");
  CHECK(j.at("mean_accuracy").get<double>() >= 0.99);
  CHECK(j.at("grid").size() == 2);
  CHECK(j.at("per_seed_accuracies").size() == 2);
  CHECK(j.at("best_config").at("hidden_sizes") == json::array({32, 32}));
  CHECK(fs::exists(out / "probe_model.bin"));
  CHECK(load_probe_model(out / "probe_model.bin").params.w1.cols() == 2);

  r = run_cli({"--out", out.path().string(), "probe", "--hidden1", "64", "--hidden2", "128", "--reg-weights", "0.01",
               "--probe-seeds", "1", "--epochs", "50", in("blobs.embv"), in("blobs.tsv"), in("blobs.embv"),
               in("blobs.tsv")});
  REQUIRE(r.code == 0);
  CHECK(read_json(out / "probe.json").at("best_config").at("hidden_sizes") == json::array({64, 128}));

  r = run_cli({"--out", out.path().string(), "probe", in("blobs.embv"), in("blobs.tsv"), in("wide.embv"), in("wide.tsv")});
  CHECK(r.code == 1);
  CHECK(r.err.find("DimensionMismatch") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "reruns are byte-identical") {
  const std::vector<std::vector<std::string>> commands{
      {"cluster", in("xor.embv"), in("xor.tsv")},
      {"distances", in("blobs.embv"), in("blobs.tsv")},
      {"similarity", in("blobs.embv"), in("blobs.tsv"), in("blobs2x.embv"), in("blobs2x.tsv")},
      {"track", in("radial")},
      {"crosstask", in("blobs.embv"), in("blobs.tsv"), in("blobs2x.embv"), in("blobs2x.tsv")},
      {"probe", "--hidden1", "32", "--hidden2", "32", "--reg-weights", "1e-3", "--probe-seeds", "2", "--epochs", "40",
       in("blobs.embv"), in("blobs.tsv"), in("blobs.embv"), in("blobs.tsv")},
  };
  for (const auto& cmd : commands) {
    testutil::TempDir a, b;
    auto args_a = std::vector<std::string>{"--out", a.path().string(), "--threads", "1"};
    auto args_b = std::vector<std::string>{"--out", b.path().string(), "--threads", "3"};
    args_a.insert(args_a.end(), cmd.begin(), cmd.end());
    args_b.insert(args_b.end(), cmd.begin(), cmd.end());
    const auto ra = run_cli(args_a);
    const auto rb = run_cli(args_b);
    REQUIRE(ra.code == 0);
    CHECK(ra.out == rb.out);
    const auto fa = snapshot(a.path()), fb = snapshot(b.path());
    CHECK(fa.size() >= 1);
    CHECK(fa == fb);
  }
}

TEST_CASE_FIXTURE(Fixture, "config file with flag overrides") {
  testutil::TempDir out;
  testutil::spit(out / "cfg.json", R"({"epsilon": 100.0, "formats": ["json"], "out": "ignored"})");
  // epsilon 100 makes the blobs irreducible; the flag restores the default.
  auto r = run_cli({"--config", (out / "cfg.json").string(), "--out", out.path().string(), "cluster", in("blobs.embv"),
                    in("blobs.tsv")});
  CHECK(r.code == 2);
  r = run_cli({"--config", (out / "cfg.json").string(), "--eps", "1e-6", "--out", out.path().string(), "cluster",
               in("blobs.embv"), in("blobs.tsv")});
  CHECK(r.code == 0);
  CHECK(fs::exists(out / "clusters.json"));
  CHECK_FALSE(fs::exists(out / "clusters.csv"));

  testutil::spit(out / "bad.json", R"({"epsilonn": 1})");
  CHECK(run_cli({"--config", (out / "bad.json").string(), "cluster", in("blobs.embv"), in("blobs.tsv")}).code == 1);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"bogus"}).code == 1);
  CHECK(run_cli({"cluster", "only-one"}).code == 1);
  CHECK(run_cli({"--format", "pdf", "cluster", "a", "b"}).code == 1);
  CHECK(run_cli({"cluster", "/nonexistent.embv", "/nonexistent.tsv"}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
}
