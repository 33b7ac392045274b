#include "geoprobe/analytics.hpp"
#include "geoprobe/cli.hpp"
#include "geoprobe/clustering.hpp"
#include "geoprobe/dataset.hpp"
#include "geoprobe/probe.hpp"
#include "geoprobe/separability.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace geoprobe;

namespace {

template <typename T>
std::string dump(const T& value) {
  return nlohmann::json(value).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Convex-hull geometry probes for labeled embeddings";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(error.ptr())(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<LabeledPointSet>(m, "LabeledPointSet")
      .def(py::init([](Eigen::MatrixXd points, const std::vector<std::string>& labels) {
             return LabeledPointSet::from_row_labels(std::move(points), labels);
           }),
           py::arg("points"), py::arg("labels"))
      .def_property_readonly("points", &LabeledPointSet::points)
      .def_property_readonly("labels",
                             [](const LabeledPointSet& s) { return std::vector<int>(s.labels().begin(), s.labels().end()); })
      .def_property_readonly("label_names", &LabeledPointSet::label_names)
      .def_property_readonly("size", &LabeledPointSet::size)
      .def_property_readonly("dim", &LabeledPointSet::dim)
      .def("__len__", &LabeledPointSet::size)
      .def("__eq__", [](const LabeledPointSet& a, const LabeledPointSet& b) { return a == b; });

  m.def("load_point_set", &load_point_set, py::arg("embedding_path"), py::arg("labels_path"));
  m.def("save_point_set", &save_point_set, py::arg("set"), py::arg("embedding_path"), py::arg("labels_path"),
        py::arg("meta") = std::map<std::string, std::string>{});
  m.def(
      "read_embv",
      [](const std::filesystem::path& p) {
        auto e = read_embv(p);
        return py::make_tuple(e.points, e.header.meta);
      },
      py::arg("path"), "Returns (points, meta).");
  m.def("write_embv", &write_embv, py::arg("path"), py::arg("points"),
        py::arg("meta") = std::map<std::string, std::string>{});
  m.def("read_labels_tsv", &read_labels_tsv, py::arg("path"), py::arg("expected_count"));
  m.def("centroid", &centroid, py::arg("set"), py::arg("label_id"));

  py::class_<SeparabilityConfig>(m, "SeparabilityConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &SeparabilityConfig::epsilon)
      .def_readwrite("gap_tol", &SeparabilityConfig::gap_tol)
      .def_readwrite("max_iterations", &SeparabilityConfig::max_iterations)
      .def_readwrite("relative_eps", &SeparabilityConfig::relative_eps);

  py::class_<NearestPoints>(m, "NearestPoints")
      .def_readonly("distance", &NearestPoints::distance)
      .def_readonly("witness_a", &NearestPoints::witness_a)
      .def_readonly("witness_b", &NearestPoints::witness_b)
      .def_readonly("gap", &NearestPoints::gap)
      .def_readonly("lower_bound", &NearestPoints::lower_bound)
      .def_readonly("iterations", &NearestPoints::iterations);

  py::class_<Hyperplane>(m, "Hyperplane")
      .def_readonly("normal", &Hyperplane::normal)
      .def_readonly("offset", &Hyperplane::offset)
      .def_readonly("margin", &Hyperplane::margin);

  m.def(
      "hull_distance",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SeparabilityConfig& cfg) {
        return hull_distance(a, b, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("config") = SeparabilityConfig{});
  m.def(
      "is_separable",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SeparabilityConfig& cfg) {
        return is_separable(a, b, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("config") = SeparabilityConfig{});
  m.def(
      "max_margin_separator",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const SeparabilityConfig& cfg) {
        return max_margin_separator(a, b, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("config") = SeparabilityConfig{});

  py::class_<ClusterSet>(m, "ClusterSet")
      .def_property_readonly("clusters",
                             [](const ClusterSet& cs) {
                               std::vector<std::pair<int, std::vector<Index>>> out;
                               for (const auto& c : cs.clusters()) out.emplace_back(c.label, c.members);
                               return out;
                             })
      .def_property_readonly("verified", &ClusterSet::verified)
      .def_property_readonly("epsilon", &ClusterSet::epsilon)
      .def("to_json", [](const ClusterSet& cs) { return dump(cs); });

  m.def(
      "cluster",
      [](const LabeledPointSet& set, const SeparabilityConfig& cfg, unsigned threads) {
        py::gil_scoped_release release;
        return cluster(set, cfg, {threads});
      },
      py::arg("set"), py::arg("config") = SeparabilityConfig{}, py::arg("threads") = 1u);
  m.def("count_clusters", &count_clusters);
  m.def("is_linear", &is_linear);

  py::class_<DistanceVector>(m, "DistanceVector")
      .def_readonly("values", &DistanceVector::values)
      .def_property_readonly("pair_order",
                             [](const DistanceVector& v) {
                               std::vector<std::pair<int, int>> out;
                               for (const auto& p : v.pair_order) out.emplace_back(p.first, p.second);
                               return out;
                             })
      .def_readonly("label_names", &DistanceVector::label_names)
      .def("__len__", &DistanceVector::size);

  m.def("distance_vector", &distance_vector, py::arg("clusters"), py::arg("threads") = 1u);
  m.def("spatial_similarity", &spatial_similarity);
  m.def(
      "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });
  m.def("min_distance_per_label", py::overload_cast<const ClusterSet&, unsigned>(&min_distance_per_label),
        py::arg("clusters"), py::arg("threads") = 1u);
  m.def(
      "cross_task_report",
      [](const ClusterSet& a, const ClusterSet& b) { return dump(cross_task_report(a, b)); },
      py::arg("baseline"), py::arg("tuned"), "Report as a JSON string.");
  m.def(
      "track_series",
      [](const std::filesystem::path& dir, const SeparabilityConfig& cfg, unsigned threads) {
        const auto series = load_series(dir);
        py::gil_scoped_release release;
        return dump(track_series(series, cfg, threads));
      },
      py::arg("run_dir"), py::arg("config") = SeparabilityConfig{}, py::arg("threads") = 1u,
      "Loads a series directory and returns the report as a JSON string.");
  m.def("difference_vectors", &difference_vectors);

  py::class_<PcaProjection>(m, "PcaProjection")
      .def_readonly("mean", &PcaProjection::mean)
      .def_readonly("axes", &PcaProjection::axes)
      .def_readonly("projected", &PcaProjection::projected)
      .def_readonly("explained_variance_ratio", &PcaProjection::explained_variance_ratio);
  m.def("pca_project", &pca_project, py::arg("vectors"), py::arg("k"));

  py::class_<ProbeConfig>(m, "ProbeConfig")
      .def(py::init<>())
      .def_readwrite("hidden1", &ProbeConfig::hidden1)
      .def_readwrite("hidden2", &ProbeConfig::hidden2)
      .def_readwrite("reg_weight", &ProbeConfig::reg_weight)
      .def_readwrite("max_iterations", &ProbeConfig::max_iterations)
      .def_readwrite("seeds", &ProbeConfig::seeds)
      .def_readwrite("learning_rate", &ProbeConfig::learning_rate)
      .def_readwrite("batch_size", &ProbeConfig::batch_size);

  py::class_<ProbeModel>(m, "ProbeModel")
      .def_readonly("config", &ProbeModel::config)
      .def_readonly("label_names", &ProbeModel::label_names)
      .def_readonly("loss_curve", &ProbeModel::loss_curve)
      .def_readonly("per_seed_accuracies", &ProbeModel::per_seed_accuracies)
      .def_readonly("mean_accuracy", &ProbeModel::mean_accuracy)
      .def_readonly("std_accuracy", &ProbeModel::std_accuracy)
      .def("predict", &ProbeModel::predict);

  m.def("train_probe", &train_probe, py::arg("train"), py::arg("config") = ProbeConfig{}, py::arg("seed") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("test"));
  m.def("train_and_evaluate", &train_and_evaluate, py::arg("train"), py::arg("test"),
        py::arg("config") = ProbeConfig{}, py::arg("base_seed") = 0, py::arg("threads") = 1u,
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line front end; returns (exit_code, stdout, stderr).");
}
