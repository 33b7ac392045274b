#pragma once

// Small on-disk inputs for the command-line tests.

#include "geoprobe/dataset.hpp"

#include "support/synth.hpp"

#include <filesystem>
#include <string>

namespace fixtures {

namespace fs = std::filesystem;

inline void save(const geoprobe::LabeledPointSet& set, const fs::path& dir, const std::string& stem) {
  geoprobe::save_point_set(set, dir / (stem + ".embv"), dir / (stem + ".tsv"));
}

inline geoprobe::LabeledPointSet scaled(const geoprobe::LabeledPointSet& s, double c) {
  return {c * s.points(), {s.labels().begin(), s.labels().end()}, s.label_names()};
}

/// blobs, xor, dup, two, blobs2x, scaled series and a radial-push series.
inline void write_all(const fs::path& dir) {
  const Eigen::MatrixXd centers = synth::spread_centers(3, 2, 8.0);
  const auto blobs = synth::blobs(centers, 12, 1.0, 1);
  save(blobs, dir, "blobs");
  save(scaled(blobs, 2.0), dir, "blobs2x");
  save(synth::xor_layout(8, 4.0, 1.8, 2), dir, "xor");
  save(synth::blobs(synth::spread_centers(2, 2, 5.0), 6, 1.0, 3), dir, "two");

  Eigen::MatrixXd dup(3, 2);
  dup << 0, 0, 1, 1, 0, 0;
  const std::vector<std::string> names{"a", "a", "b"};
  save(geoprobe::LabeledPointSet::from_row_labels(dup, names), dir, "dup");

  const Eigen::MatrixXd wide_centers = synth::spread_centers(3, 4, 8.0);
  save(synth::blobs(wide_centers, 12, 1.0, 4), dir, "wide");

  const Eigen::MatrixXd push_centers = synth::spread_centers(8, 2, 4.0);
  const auto base = synth::blobs(push_centers, 6, 1.0, 5);
  for (const auto& [run, kind] : {std::pair{"radial", 0}, std::pair{"scaling", 1}}) {
    const auto root = dir / run;
    fs::create_directories(root);
    geoprobe::write_labels_tsv(root / "labels.tsv", base);
    for (int k = 0; k < 10; ++k) {
      const auto step = root / ("step-" + std::to_string(k * 10));
      fs::create_directories(step);
      const auto set = kind == 0 ? synth::radial_push(base, push_centers, 0.25, k) : scaled(base, 1.0 + 0.5 * k);
      geoprobe::write_embv(step / "layer-2.embv", set.points(), {{"step", std::to_string(k * 10)}});
    }
  }
}

}  // namespace fixtures
