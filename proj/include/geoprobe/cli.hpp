#pragma once

#include "geoprobe/probe.hpp"
#include "geoprobe/separability.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace geoprobe::cli {

enum class Format { Json, Csv, Svg };

enum ExitCode : int {
  kSuccess = 0,
  kUsageOrValidation = 1,
  kUnsatisfiableData = 2,
};

struct RunConfig {
  SeparabilityConfig separability;
  ProbeSearchSpace probe_space;
  std::uint64_t seed = 0;
  /// 0 uses every available core.
  unsigned threads = 0;
  std::filesystem::path out = ".";
  std::set<Format> formats{Format::Json, Format::Csv, Format::Svg};
  /// Labels plotted from each end of the min-distance change ranking.
  int top_k = 3;
  std::optional<int> layer;

  bool wants(Format f) const { return formats.contains(f); }
};

/// Reads a JSON object mirroring RunConfig. Unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);

std::set<Format> parse_formats(const std::string& comma_separated);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoprobe::cli
