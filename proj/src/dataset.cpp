#include "geoprobe/dataset.hpp"

#include "geoprobe/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace geoprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void check_finite_rows(const Eigen::MatrixXd& points) {
  for (Index r = 0; r < points.rows(); ++r) {
    if (!points.row(r).allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(r));
    }
  }
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

LabeledPointSet::LabeledPointSet(Eigen::MatrixXd points, std::vector<int> labels,
                                 std::vector<std::string> label_names)
    : points_(std::move(points)), labels_(std::move(labels)), label_names_(std::move(label_names)) {
  if (points_.rows() < 1) throw Error(ErrorCode::EmptySet, "a point set needs at least one row");
  if (points_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "points must have dimension >= 1");
  if (static_cast<Index>(labels_.size()) != points_.rows()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(points_.rows()) + " rows but " +
                                              std::to_string(labels_.size()) + " labels");
  }
  for (std::size_t i = 0; i < label_names_.size(); ++i) {
    if (label_names_[i].empty()) throw Error(ErrorCode::InvalidArgument, "empty label name");
    if (i > 0 && !(label_names_[i - 1] < label_names_[i])) {
      throw Error(ErrorCode::InvalidArgument,
                  "label names must be unique and sorted, got '" + label_names_[i - 1] +
                      "' before '" + label_names_[i] + "'");
    }
  }
  const int n = num_labels();
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] < 0 || labels_[r] >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "row " + std::to_string(r) + " has label id " + std::to_string(labels_[r]));
    }
  }
  check_finite_rows(points_);
}

LabeledPointSet LabeledPointSet::from_row_labels(Eigen::MatrixXd points,
                                                 std::span<const std::string> row_labels) {
  std::vector<std::string> names(row_labels.begin(), row_labels.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<int> ids;
  ids.reserve(row_labels.size());
  for (const auto& l : row_labels) {
    ids.push_back(static_cast<int>(std::lower_bound(names.begin(), names.end(), l) - names.begin()));
  }
  return LabeledPointSet(std::move(points), std::move(ids), std::move(names));
}

std::optional<int> LabeledPointSet::find_label(std::string_view name) const {
  auto it = std::lower_bound(label_names_.begin(), label_names_.end(), name);
  if (it == label_names_.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - label_names_.begin());
}

std::vector<Index> LabeledPointSet::rows_with_label(int id) const {
  std::vector<Index> rows;
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] == id) rows.push_back(static_cast<Index>(r));
  }
  return rows;
}

Eigen::MatrixXd LabeledPointSet::gather(std::span<const Index> rows) const {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), dim());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = points_.row(rows[i]);
  return out;
}

bool LabeledPointSet::same_label_space(const LabeledPointSet& other) const {
  return label_names_ == other.label_names_ && labels_ == other.labels_;
}

bool operator==(const LabeledPointSet& a, const LabeledPointSet& b) {
  return a.label_names_ == b.label_names_ && a.labels_ == b.labels_ &&
         a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
         a.points_ == b.points_;
}

Embedding read_embv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MagicMismatch, path.string() + " is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw Error(ErrorCode::MagicMismatch, path.string() + " does not start with a JSON header line");
  }
  if (!header.is_object() || header.value("magic", "") != EmbeddingHeader::kMagic) {
    throw Error(ErrorCode::MagicMismatch, path.string() + " is not an EMBV1 file");
  }
  if (header.value("dtype", "") != EmbeddingHeader::kDtype) {
    throw Error(ErrorCode::MagicMismatch, path.string() + " has unsupported dtype");
  }

  Embedding emb;
  try {
    emb.header.count = header.at("count").get<std::int64_t>();
    emb.header.dim = header.at("dim").get<std::int64_t>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MagicMismatch, path.string() + " header lacks integer count/dim");
  }
  if (emb.header.count < 1 || emb.header.dim < 1) {
    throw Error(ErrorCode::CountMismatch, "header count and dim must be positive");
  }
  if (auto it = header.find("meta"); it != header.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      emb.header.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }

  const auto n = static_cast<std::size_t>(emb.header.count);
  const auto d = static_cast<std::size_t>(emb.header.dim);
  std::vector<std::uint32_t> raw(n * d);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (static_cast<std::size_t>(in.gcount()) != raw.size() * 4) {
    throw Error(ErrorCode::CountMismatch, path.string() + ": payload shorter than count*dim*4 bytes");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::CountMismatch, path.string() + ": trailing bytes after payload");
  }

  emb.points.resize(static_cast<Index>(n), static_cast<Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const auto value = std::bit_cast<float>(to_little_endian(raw[r * d + c]));
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue, path.string() + ": row " + std::to_string(r));
      }
      emb.points(static_cast<Index>(r), static_cast<Index>(c)) = static_cast<double>(value);
    }
  }
  return emb;
}

void write_embv(const fs::path& path, const Eigen::MatrixXd& points,
                const std::map<std::string, std::string>& meta) {
  if (points.rows() < 1 || points.cols() < 1) throw Error(ErrorCode::EmptySet, "nothing to write");
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(points.size()));
  for (Index r = 0; r < points.rows(); ++r) {
    for (Index c = 0; c < points.cols(); ++c) {
      const auto value = static_cast<float>(points(r, c));
      if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(r));
      raw[static_cast<std::size_t>(r * points.cols() + c)] = to_little_endian(std::bit_cast<std::uint32_t>(value));
    }
  }
  json header = {{"magic", EmbeddingHeader::kMagic},
                 {"count", points.rows()},
                 {"dim", points.cols()},
                 {"dtype", EmbeddingHeader::kDtype},
                 {"meta", meta}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<std::string> read_labels_tsv(const fs::path& path, std::int64_t expected_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::vector<std::optional<std::string>> by_index(static_cast<std::size_t>(std::max<std::int64_t>(expected_count, 0)));
  std::int64_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::UnknownLabelColumn, where + ": expected index<TAB>label");
    std::int64_t index = -1;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + tab, index);
    if (ec != std::errc() || ptr != line.data() + tab) {
      throw Error(ErrorCode::UnknownLabelColumn, where + ": index column is not an integer");
    }
    std::string name = line.substr(tab + 1);
    if (name.empty() || name.find('\t') != std::string::npos) {
      throw Error(ErrorCode::UnknownLabelColumn, where + ": expected exactly one nonempty label column");
    }
    ++rows;
    if (index < 0 || index >= expected_count) continue;  // reported below as a count mismatch
    auto& slot = by_index[static_cast<std::size_t>(index)];
    if (slot) throw Error(ErrorCode::UnknownLabelColumn, where + ": duplicate index " + std::to_string(index));
    slot = std::move(name);
  }
  if (rows != expected_count) {
    throw Error(ErrorCode::CountMismatch, path.string() + ": " + std::to_string(rows) +
                                              " label rows, header count " + std::to_string(expected_count));
  }
  std::vector<std::string> labels;
  labels.reserve(by_index.size());
  for (std::size_t i = 0; i < by_index.size(); ++i) {
    if (!by_index[i]) throw Error(ErrorCode::UnknownLabelColumn, path.string() + ": no row for index " + std::to_string(i));
    labels.push_back(std::move(*by_index[i]));
  }
  return labels;
}

void write_labels_tsv(const fs::path& path, const LabeledPointSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (Index r = 0; r < set.size(); ++r) out << r << '\t' << set.label_name(set.label(r)) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

LabeledPointSet load_point_set(const fs::path& embedding_path, const fs::path& labels_path) {
  auto emb = read_embv(embedding_path);
  auto labels = read_labels_tsv(labels_path, emb.header.count);
  return LabeledPointSet::from_row_labels(std::move(emb.points), labels);
}

void save_point_set(const LabeledPointSet& set, const fs::path& embedding_path,
                    const fs::path& labels_path, const std::map<std::string, std::string>& meta) {
  write_embv(embedding_path, set.points(), meta);
  write_labels_tsv(labels_path, set);
}

LabeledPointSet concat_pairs(const LabeledPointSet& set, std::span<const TokenPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptySet, "no pairs to concatenate");
  const Index d = set.dim();
  Eigen::MatrixXd rows(static_cast<Index>(pairs.size()), 2 * d);
  std::vector<std::string> labels;
  labels.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.head < 0 || p.head >= set.size() || p.modifier < 0 || p.modifier >= set.size()) {
      throw Error(ErrorCode::IndexOutOfRange, "pair " + std::to_string(i) + " references (" +
                                                  std::to_string(p.head) + ", " + std::to_string(p.modifier) +
                                                  ") with N=" + std::to_string(set.size()));
    }
    const auto r = static_cast<Index>(i);
    rows.row(r).head(d) = set.points().row(p.head);
    rows.row(r).tail(d) = set.points().row(p.modifier);
    labels.push_back(p.label);
  }
  return LabeledPointSet::from_row_labels(std::move(rows), labels);
}

Eigen::VectorXd centroid(const LabeledPointSet& set, int label_id) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(set.dim());
  Index count = 0;
  for (Index r = 0; r < set.size(); ++r) {
    if (set.label(r) == label_id) {
      sum += set.points().row(r).transpose();
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyLabel, "no rows carry label id " + std::to_string(label_id));
  return sum / static_cast<double>(count);
}

std::string_view to_string(SeriesAxis axis) noexcept {
  return axis == SeriesAxis::Layers ? "layers" : "fine_tuning_steps";
}

SnapshotSeries::SnapshotSeries(SeriesAxis axis, std::vector<Snapshot> steps)
    : axis_(axis), steps_(std::move(steps)) {
  if (steps_.empty()) throw Error(ErrorCode::EmptySeries, "a series needs at least one snapshot");
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i].step < 0) throw Error(ErrorCode::InvalidArgument, "negative step index");
    if (i == 0) continue;
    if (steps_[i].step <= steps_[i - 1].step) {
      throw Error(ErrorCode::InvalidArgument, "step indices must be strictly increasing");
    }
    const auto& first = steps_.front().set;
    const auto& cur = steps_[i].set;
    if (!first.same_label_space(cur)) {
      throw Error(ErrorCode::InconsistentLabelSpace,
                  "step " + std::to_string(steps_[i].step) + " does not share the labels of step " +
                      std::to_string(steps_.front().step));
    }
    if (first.dim() != cur.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "step " + std::to_string(steps_[i].step) + " changes dimension");
    }
  }
}

namespace {

std::optional<std::int64_t> numbered(const fs::path& p, const std::regex& pattern) {
  std::smatch m;
  const auto name = p.filename().string();
  if (!std::regex_match(name, m, pattern)) return std::nullopt;
  std::int64_t v = 0;
  const auto s = m[1].str();
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::vector<std::pair<std::int64_t, fs::path>> numbered_entries(const fs::path& dir, const std::regex& pattern,
                                                                bool want_directory) {
  std::vector<std::pair<std::int64_t, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (want_directory ? !entry.is_directory() : !entry.is_regular_file()) continue;
    if (auto k = numbered(entry.path(), pattern)) out.emplace_back(*k, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SnapshotSeries load_series(const fs::path& directory, std::optional<int> layer) {
  if (!fs::is_directory(directory)) throw Error(ErrorCode::Io, directory.string() + " is not a directory");
  static const std::regex step_re(R"(step-(\d+))");
  static const std::regex layer_re(R"(layer-(\d+)\.embv)");

  const auto shared_labels = directory / "labels.tsv";
  auto pick_layer = [&](const fs::path& dir) -> std::optional<std::pair<std::int64_t, fs::path>> {
    auto layers = numbered_entries(dir, layer_re, false);
    if (layers.empty()) return std::nullopt;
    if (!layer) return layers.back();
    for (auto& l : layers) {
      if (l.first == *layer) return l;
    }
    throw Error(ErrorCode::Io, dir.string() + " has no layer-" + std::to_string(*layer) + ".embv");
  };

  std::vector<Snapshot> snapshots;
  const auto steps = numbered_entries(directory, step_re, true);
  if (!steps.empty()) {
    for (const auto& [k, dir] : steps) {
      auto chosen = pick_layer(dir);
      if (!chosen) throw Error(ErrorCode::Io, dir.string() + " holds no layer-<l>.embv file");
      const auto labels = fs::exists(dir / "labels.tsv") ? dir / "labels.tsv" : shared_labels;
      snapshots.push_back({k, load_point_set(chosen->second, labels)});
    }
    return SnapshotSeries(SeriesAxis::FineTuningSteps, std::move(snapshots));
  }

  const auto layers = numbered_entries(directory, layer_re, false);
  if (layers.empty()) throw Error(ErrorCode::EmptySeries, directory.string() + " has no step-* or layer-* entries");
  for (const auto& [l, file] : layers) snapshots.push_back({l, load_point_set(file, shared_labels)});
  return SnapshotSeries(SeriesAxis::Layers, std::move(snapshots));
}

}  // namespace geoprobe
