#include "geoprobe/dataset.hpp"
#include "geoprobe/error.hpp"

#include "support/synth.hpp"
#include "support/tempdir.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

using namespace geoprobe;
using testutil::TempDir;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

std::string embv_bytes(std::int64_t count, std::int64_t dim, const std::vector<float>& values) {
  std::string s = R"({"magic":"EMBV1","count":)" + std::to_string(count) + R"(,"dim":)" + std::to_string(dim) +
                  R"(,"dtype":"f32le","meta":{}})" + "\n";
  for (float v : values) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    s.append(buf, 4);
  }
  return s;
}

}  // namespace

TEST_CASE("load_point_set decodes header, payload and labels") {
  TempDir dir;
  testutil::spit(dir / "a.embv", embv_bytes(3, 2, {1, 2, 3, 4, 5, 6}));
  testutil::spit(dir / "a.tsv", "0\tb\n1\ta\n2\tb\n");
  const auto set = load_point_set(dir / "a.embv", dir / "a.tsv");
  CHECK(set.size() == 3);
  CHECK(set.dim() == 2);
  CHECK(set.label_names() == std::vector<std::string>{"a", "b"});
  CHECK(set.label(0) == 1);
  CHECK(set.label(1) == 0);
  CHECK(set.points()(2, 1) == 6.0);
}

TEST_CASE("load_point_set rejects malformed inputs") {
  TempDir dir;
  testutil::spit(dir / "a.embv", embv_bytes(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  testutil::spit(dir / "three.tsv", "0\ta\n1\ta\n2\tb\n");
  CHECK(code_of([&] { load_point_set(dir / "a.embv", dir / "three.tsv"); }) == ErrorCode::CountMismatch);

  const float nan = std::numeric_limits<float>::quiet_NaN();
  testutil::spit(dir / "nan.embv", embv_bytes(3, 2, {1, 2, 3, nan, 5, 6}));
  testutil::spit(dir / "ok.tsv", "0\ta\n1\ta\n2\tb\n");
  try {
    load_point_set(dir / "nan.embv", dir / "ok.tsv");
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }

  auto bad_magic = embv_bytes(3, 2, {1, 2, 3, 4, 5, 6});
  bad_magic.replace(bad_magic.find("EMBV1"), 5, "EMBV2");
  testutil::spit(dir / "magic.embv", bad_magic);
  CHECK(code_of([&] { read_embv(dir / "magic.embv"); }) == ErrorCode::MagicMismatch);
  testutil::spit(dir / "text.embv", "hello\n");
  CHECK(code_of([&] { read_embv(dir / "text.embv"); }) == ErrorCode::MagicMismatch);

  testutil::spit(dir / "short.embv", embv_bytes(3, 2, {1, 2, 3, 4, 5}));
  CHECK(code_of([&] { read_embv(dir / "short.embv"); }) == ErrorCode::CountMismatch);
  testutil::spit(dir / "long.embv", embv_bytes(3, 2, {1, 2, 3, 4, 5, 6, 7}));
  CHECK(code_of([&] { read_embv(dir / "long.embv"); }) == ErrorCode::CountMismatch);

  testutil::spit(dir / "ok.embv", embv_bytes(3, 2, {1, 2, 3, 4, 5, 6}));
  testutil::spit(dir / "cols.tsv", "0\ta\textra\n1\ta\n2\tb\n");
  CHECK(code_of([&] { load_point_set(dir / "ok.embv", dir / "cols.tsv"); }) == ErrorCode::UnknownLabelColumn);
  testutil::spit(dir / "dup.tsv", "0\ta\n0\ta\n2\tb\n");
  CHECK(code_of([&] { load_point_set(dir / "ok.embv", dir / "dup.tsv"); }) == ErrorCode::UnknownLabelColumn);
  testutil::spit(dir / "noidx.tsv", "x\ta\n1\ta\n2\tb\n");
  CHECK(code_of([&] { load_point_set(dir / "ok.embv", dir / "noidx.tsv"); }) == ErrorCode::UnknownLabelColumn);
}

TEST_CASE("write then load round-trips at float32 precision") {
  TempDir dir;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 1 + trial * 3, d = 1 + trial % 4;
    Eigen::MatrixXd pts = synth::uniform_box(rng, n, d, -100.0, 100.0);
    std::vector<std::string> names;
    for (Eigen::Index r = 0; r < n; ++r) names.push_back("lab" + std::to_string((r * 7 + trial) % 3));
    const auto set = LabeledPointSet::from_row_labels(pts, names);
    save_point_set(set, dir / "rt.embv", dir / "rt.tsv", {{"layer", "2"}});
    const auto back = load_point_set(dir / "rt.embv", dir / "rt.tsv");
    CHECK(back.labels().size() == set.labels().size());
    CHECK(std::equal(back.labels().begin(), back.labels().end(), set.labels().begin()));
    CHECK(back.label_names() == set.label_names());
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        const float expected = static_cast<float>(pts(r, c));
        CHECK(std::bit_cast<std::uint64_t>(back.points()(r, c)) ==
              std::bit_cast<std::uint64_t>(static_cast<double>(expected)));
      }
    }
    CHECK(read_embv(dir / "rt.embv").header.meta.at("layer") == "2");
  }
}

TEST_CASE("permuted label rows canonicalize to the same set") {
  TempDir dir;
  testutil::spit(dir / "a.embv", embv_bytes(4, 1, {0, 1, 2, 3}));
  testutil::spit(dir / "x.tsv", "0\tzeta\n1\talpha\n2\tmid\n3\talpha\n");
  testutil::spit(dir / "y.tsv", "3\talpha\n2\tmid\n0\tzeta\n1\talpha\n");
  CHECK(load_point_set(dir / "a.embv", dir / "x.tsv") == load_point_set(dir / "a.embv", dir / "y.tsv"));
}

TEST_CASE("LabeledPointSet validates its invariants") {
  Eigen::MatrixXd one(1, 2);
  one << 1, 2;
  CHECK(code_of([&] { LabeledPointSet(Eigen::MatrixXd(0, 2), {}, {"a"}); }) == ErrorCode::EmptySet);
  CHECK(code_of([&] { LabeledPointSet(one, {1}, {"a"}); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([&] { LabeledPointSet(one, {0}, {"b", "a"}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { LabeledPointSet(one, {0}, {""}); }) == ErrorCode::InvalidArgument);
  Eigen::MatrixXd inf = one;
  inf(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { LabeledPointSet(inf, {0}, {"a"}); }) == ErrorCode::NonFiniteValue);
}

TEST_CASE("concat_pairs joins head and modifier rows") {
  Eigen::MatrixXd pts(2, 2);
  pts << 1, 2, 3, 4;
  const std::vector<std::string> names{"w", "w"};
  const auto set = LabeledPointSet::from_row_labels(pts, names);

  const std::vector<TokenPair> pairs{{0, 1, "nsubj"}, {0, 0, "self"}};
  const auto out = concat_pairs(set, pairs);
  CHECK(out.dim() == 4);
  Eigen::RowVector4d first(1, 2, 3, 4), second(1, 2, 1, 2);
  CHECK(out.points().row(0) == first);
  CHECK(out.points().row(1) == second);
  CHECK(out.label_name(out.label(0)) == "nsubj");
  CHECK(out.label_name(out.label(1)) == "self");

  CHECK(code_of([&] { concat_pairs(set, std::vector<TokenPair>{}); }) == ErrorCode::EmptySet);
  CHECK(code_of([&] { concat_pairs(set, std::vector<TokenPair>{{0, 2, "x"}}); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("centroid is the per-label mean") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 2, 2, 5, -3;
  const std::vector<std::string> names{"a", "a", "b"};
  const auto set = LabeledPointSet::from_row_labels(pts, names);
  CHECK(centroid(set, 0) == Eigen::Vector2d(1, 1));
  CHECK(centroid(set, 1) == Eigen::Vector2d(5, -3));
  const auto padded = LabeledPointSet(pts, {0, 0, 0}, {"a", "b"});
  CHECK(code_of([&] { centroid(padded, 1); }) == ErrorCode::EmptyLabel);
}

TEST_CASE("load_series reads step directories") {
  TempDir dir;
  testutil::spit(dir / "labels.tsv", "0\ta\n1\tb\n2\tc\n");
  for (int step : {100, 0}) {
    std::filesystem::create_directories(dir / ("step-" + std::to_string(step)));
    testutil::spit(dir / ("step-" + std::to_string(step)) / "layer-1.embv", embv_bytes(3, 1, {0, 1, float(step)}));
    testutil::spit(dir / ("step-" + std::to_string(step)) / "layer-0.embv", embv_bytes(3, 1, {9, 9, 9}));
  }
  const auto series = load_series(dir.path());
  CHECK(series.size() == 2);
  CHECK(series.axis() == SeriesAxis::FineTuningSteps);
  CHECK(series[0].step == 0);
  CHECK(series[1].step == 100);
  CHECK(series[1].set.points()(2, 0) == 100.0);
  CHECK(load_series(dir.path(), 0)[1].set.points()(2, 0) == 9.0);

  testutil::spit(dir / "step-100" / "labels.tsv", "0\ta\n1\tb\n2\td\n");
  CHECK(code_of([&] { load_series(dir.path()); }) == ErrorCode::InconsistentLabelSpace);

  TempDir empty;
  CHECK(code_of([&] { load_series(empty.path()); }) == ErrorCode::EmptySeries);
}

TEST_CASE("load_series falls back to per-layer files") {
  TempDir dir;
  testutil::spit(dir / "labels.tsv", "0\ta\n1\tb\n");
  for (int l = 0; l < 3; ++l) testutil::spit(dir / ("layer-" + std::to_string(l) + ".embv"), embv_bytes(2, 1, {0, float(l)}));
  const auto series = load_series(dir.path());
  CHECK(series.axis() == SeriesAxis::Layers);
  CHECK(series.size() == 3);
  CHECK(series[2].set.points()(1, 0) == 2.0);
}

TEST_CASE("SnapshotSeries enforces ordering and a shared label space") {
  Eigen::MatrixXd pts(2, 1);
  pts << 0, 1;
  const LabeledPointSet s(pts, {0, 1}, {"a", "b"});
  CHECK(code_of([&] { SnapshotSeries(SeriesAxis::Layers, {}); }) == ErrorCode::EmptySeries);
  CHECK(code_of([&] { SnapshotSeries(SeriesAxis::Layers, {{1, s}, {1, s}}); }) == ErrorCode::InvalidArgument);
  const LabeledPointSet swapped(pts, {1, 0}, {"a", "b"});
  CHECK(code_of([&] { SnapshotSeries(SeriesAxis::Layers, {{0, s}, {1, swapped}}); }) ==
        ErrorCode::InconsistentLabelSpace);
}
