#include "geoprobe/analytics.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>

namespace geoprobe {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

namespace {

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void to_json(nlohmann::json& j, const DistanceVector& v) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : v.pair_order) {
    pairs.push_back({v.label_names[static_cast<std::size_t>(p.first)], v.label_names[static_cast<std::size_t>(p.second)]});
  }
  j = {{"label_names", v.label_names}, {"pair_order", std::move(pairs)}, {"values", v.values}};
}

void to_json(nlohmann::json& j, const TrackReport& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    nlohmann::json centroids = nlohmann::json::object();
    for (std::size_t l = 0; l < s.centroids.size(); ++l) centroids[r.label_names[l]] = vector_json(s.centroids[l]);
    nlohmann::json mins = nullptr;
    if (s.min_distances) {
      mins = nlohmann::json::object();
      for (std::size_t l = 0; l < s.min_distances->size(); ++l) mins[r.label_names[l]] = (*s.min_distances)[l];
    }
    steps.push_back({{"step", s.step},
                     {"num_clusters", s.num_clusters},
                     {"is_linear", s.linear},
                     {"min_distances", std::move(mins)},
                     {"distance_vector", s.distances ? nlohmann::json(*s.distances) : nlohmann::json(nullptr)},
                     {"centroids", std::move(centroids)},
                     {"similarity_to_origin", optional_json(s.similarity_to_origin)},
                     {"note", s.note}});
  }
  j = {{"axis", std::string(to_string(r.axis))}, {"label_names", r.label_names}, {"steps", std::move(steps)}};
}

void to_json(nlohmann::json& j, const CrossTaskReport& r) {
  nlohmann::json per_label = nlohmann::json::object();
  for (std::size_t l = 0; l < r.label_names.size(); ++l) {
    per_label[r.label_names[l]] = {{"baseline_min_distance", r.baseline_min[l]},
                                   {"tuned_min_distance", r.tuned_min[l]},
                                   {"delta", r.per_label_delta[l]}};
  }
  j = {{"num_increased", r.num_increased},
       {"num_decreased", r.num_decreased},
       {"num_unchanged", r.num_unchanged},
       {"average_change", r.average_change},
       {"per_label", std::move(per_label)}};
}

void write_track_csv(std::ostream& out, const TrackReport& r) {
  out << "step,label,min_distance,num_clusters,is_linear,similarity_to_origin\n";
  for (const auto& s : r.steps) {
    for (std::size_t l = 0; l < r.label_names.size(); ++l) {
      out << s.step << ',' << csv_field(r.label_names[l]) << ',';
      if (s.min_distances) out << format_number((*s.min_distances)[l]);
      out << ',' << s.num_clusters << ',' << (s.linear ? "true" : "false") << ',';
      if (s.similarity_to_origin) out << format_number(*s.similarity_to_origin);
      out << '\n';
    }
  }
}

void write_crosstask_csv(std::ostream& out, const CrossTaskReport& r) {
  out << "label,baseline_min_distance,tuned_min_distance,delta\n";
  for (std::size_t l = 0; l < r.label_names.size(); ++l) {
    out << csv_field(r.label_names[l]) << ',' << format_number(r.baseline_min[l]) << ','
        << format_number(r.tuned_min[l]) << ',' << format_number(r.per_label_delta[l]) << '\n';
  }
}

void write_crosstask_summary_csv(std::ostream& out, const CrossTaskReport& r) {
  out << "num_increased,num_decreased,num_unchanged,average_change\n";
  out << r.num_increased << ',' << r.num_decreased << ',' << r.num_unchanged << ',' << format_number(r.average_change)
      << '\n';
}

void write_distance_matrix_csv(std::ostream& out, const ClusterSet& cs, const Eigen::MatrixXd& distances) {
  const auto& set = cs.source();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < cs.clusters().size(); ++i) {
    names.push_back(csv_field(set.label_name(cs.clusters()[i].label) + "#" + std::to_string(i)));
  }
  out << "cluster";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Index i = 0; i < distances.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Index k = 0; k < distances.cols(); ++k) out << ',' << format_number(distances(i, k));
    out << '\n';
  }
}

}  // namespace geoprobe
