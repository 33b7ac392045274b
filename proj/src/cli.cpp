#include "geoprobe/cli.hpp"

#include "geoprobe/analytics.hpp"
#include "geoprobe/clustering.hpp"
#include "geoprobe/dataset.hpp"
#include "geoprobe/svg.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

namespace geoprobe::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if constexpr (std::is_integral_v<T>) {
        out.push_back(static_cast<T>(std::stoll(item)));
      } else {
        out.push_back(static_cast<T>(std::stod(item)));
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "cannot parse list item '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "empty list '" + text + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <typename Writer>
void write_stream(const fs::path& path, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  write_text(path, os.str());
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::IrreducibleOverlap:
    case ErrorCode::NotLinear:
    case ErrorCode::ZeroVariance:
      return kUnsatisfiableData;
    default:
      return kUsageOrValidation;
  }
}

std::shared_ptr<const LabeledPointSet> load_shared(const std::string& embv, const std::string& labels) {
  return std::make_shared<const LabeledPointSet>(load_point_set(embv, labels));
}

json named_values(const std::vector<std::string>& names, const std::vector<double>& values) {
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = values[i];
  return j;
}

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;

  ClusterSet cluster_set(std::shared_ptr<const LabeledPointSet> set) const {
    return cluster(std::move(set), cfg.separability, {cfg.threads});
  }
};

// ---------------------------------------------------------------------------

int cmd_cluster(Context& ctx, const std::string& embv, const std::string& labels) {
  const auto cs = ctx.cluster_set(load_shared(embv, labels));
  const json summary = {{"num_clusters", count_clusters(cs)},
                        {"num_labels", cs.source().num_labels()},
                        {"is_linear", is_linear(cs)},
                        {"verified", cs.verified()}};
  if (ctx.cfg.wants(Format::Json)) {
    write_json(ctx.cfg.out / "clusters.json", cs);
    write_json(ctx.cfg.out / "summary.json", summary);
  }
  if (ctx.cfg.wants(Format::Csv)) {
    write_stream(ctx.cfg.out / "clusters.csv", [&](std::ostream& os) {
      os << "row,label,cluster\n";
      std::vector<std::size_t> owner(static_cast<std::size_t>(cs.source().size()));
      for (std::size_t c = 0; c < cs.clusters().size(); ++c) {
        for (Index m : cs.clusters()[c].members) owner[static_cast<std::size_t>(m)] = c;
      }
      for (std::size_t r = 0; r < owner.size(); ++r) {
        os << r << ',' << cs.source().label_name(cs.source().label(static_cast<Index>(r))) << ',' << owner[r] << '\n';
      }
    });
  }
  ctx.out << "clusters: " << count_clusters(cs) << "\nlabels: " << cs.source().num_labels()
          << "\nis_linear: " << (is_linear(cs) ? "true" : "false") << "\nverified: " << (cs.verified() ? "true" : "false")
          << '\n';
  return kSuccess;
}

int cmd_distances(Context& ctx, const std::string& embv, const std::string& labels) {
  const auto cs = ctx.cluster_set(load_shared(embv, labels));
  const Eigen::MatrixXd matrix = cluster_distance_matrix(cs, ctx.cfg.threads);
  if (ctx.cfg.wants(Format::Csv)) {
    write_stream(ctx.cfg.out / "distance_matrix.csv", [&](std::ostream& os) { write_distance_matrix_csv(os, cs, matrix); });
  }

  json report = {{"num_clusters", count_clusters(cs)}, {"num_labels", cs.source().num_labels()}};
  if (!is_linear(cs)) {
    report["linear"] = false;
    report["note"] = "NotLinear: " + std::to_string(count_clusters(cs)) + " clusters for " +
                     std::to_string(cs.source().num_labels()) + " labels; distance vector omitted";
    ctx.out << report["note"].get<std::string>() << '\n';
  } else {
    report["linear"] = true;
    const auto v = distance_vector(cs, ctx.cfg.threads);
    report["distance_vector"] = v;
    ctx.out << "distance vector entries: " << v.size() << '\n';
    if (v.label_names.size() >= 2) {
      const auto mins = min_distance_per_label(v);
      report["min_distances"] = named_values(v.label_names, mins);
      if (ctx.cfg.wants(Format::Csv)) {
        write_stream(ctx.cfg.out / "min_distances.csv", [&](std::ostream& os) {
          os << "label,min_distance\n";
          for (std::size_t l = 0; l < mins.size(); ++l) os << v.label_names[l] << ',' << format_number(mins[l]) << '\n';
        });
      }
    }
  }
  if (ctx.cfg.wants(Format::Json)) write_json(ctx.cfg.out / "distances.json", report);
  return kSuccess;
}

int cmd_similarity(Context& ctx, const std::string& embv_a, const std::string& labels_a, const std::string& embv_b,
                   const std::string& labels_b) {
  const auto a = ctx.cluster_set(load_shared(embv_a, labels_a));
  const auto b = ctx.cluster_set(load_shared(embv_b, labels_b));
  const auto va = distance_vector(a, ctx.cfg.threads);
  const auto vb = distance_vector(b, ctx.cfg.threads);
  const double r = spatial_similarity(va, vb);
  if (ctx.cfg.wants(Format::Json)) {
    write_json(ctx.cfg.out / "similarity.json",
               {{"similarity", r}, {"distance_vector_a", va}, {"distance_vector_b", vb}});
  }
  ctx.out << "similarity: " << format_number(r) << '\n';
  return kSuccess;
}

std::vector<std::size_t> plotted_labels(const TrackReport& report, int top_k) {
  const std::size_t n = report.label_names.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const StepReport* first = nullptr;
  const StepReport* last = nullptr;
  for (const auto& s : report.steps) {
    if (!s.min_distances) continue;
    if (!first) first = &s;
    last = &s;
  }
  if (!first || n <= 2 * static_cast<std::size_t>(top_k)) return all;
  std::vector<double> change(n);
  for (std::size_t l = 0; l < n; ++l) change[l] = (*last->min_distances)[l] - (*first->min_distances)[l];
  std::stable_sort(all.begin(), all.end(), [&](std::size_t x, std::size_t y) { return change[x] > change[y]; });
  std::vector<std::size_t> chosen(all.begin(), all.begin() + top_k);
  chosen.insert(chosen.end(), all.end() - top_k, all.end());
  return chosen;
}

int cmd_track(Context& ctx, const std::string& run_dir) {
  const auto series = load_series(run_dir, ctx.cfg.layer);
  const auto report = track_series(series, ctx.cfg.separability, ctx.cfg.threads);
  if (ctx.cfg.wants(Format::Json)) write_json(ctx.cfg.out / "track.json", report);
  if (ctx.cfg.wants(Format::Csv)) {
    write_stream(ctx.cfg.out / "track.csv", [&](std::ostream& os) { write_track_csv(os, report); });
  }
  if (ctx.cfg.wants(Format::Svg)) {
    const std::string axis_name = series.axis() == SeriesAxis::Layers ? "layer" : "fine-tuning step";
    std::vector<double> xs;
    for (const auto& s : report.steps) xs.push_back(static_cast<double>(s.step));

    std::vector<svg::LineSeries> mins;
    for (std::size_t l : plotted_labels(report, ctx.cfg.top_k)) {
      svg::LineSeries line{report.label_names[l], {}};
      for (const auto& s : report.steps) {
        line.values.push_back(s.min_distances ? std::optional((*s.min_distances)[l]) : std::nullopt);
      }
      mins.push_back(std::move(line));
    }
    write_text(ctx.cfg.out / "min_distances.svg",
               svg::line_chart("Minimum distance to other labels", axis_name, "min distance", xs, mins));

    svg::LineSeries sim{"similarity", {}};
    for (const auto& s : report.steps) sim.values.push_back(s.similarity_to_origin);
    write_text(ctx.cfg.out / "similarity.svg",
               svg::line_chart("Spatial similarity to the first snapshot", axis_name, "Pearson r", xs, {sim}));

    const auto paths = centroid_paths(series);
    const auto steps = series.size();
    Eigen::MatrixXd stacked(static_cast<Index>(paths.size() * steps), series[0].set.dim());
    for (std::size_t l = 0; l < paths.size(); ++l) {
      for (std::size_t s = 0; s < steps; ++s) stacked.row(static_cast<Index>(l * steps + s)) = paths[l][s].transpose();
    }
    try {
      const Index k = std::min<Index>({2, stacked.cols(), stacked.rows()});
      const auto pca = pca_project(stacked, k);
      std::vector<svg::PathSeries> plotted;
      for (std::size_t l = 0; l < paths.size(); ++l) {
        svg::PathSeries p{report.label_names[l], {}};
        for (std::size_t s = 0; s < steps; ++s) {
          const auto row = static_cast<Index>(l * steps + s);
          p.points.emplace_back(pca.projected(row, 0), k > 1 ? pca.projected(row, 1) : 0.0);
        }
        plotted.push_back(std::move(p));
      }
      write_text(ctx.cfg.out / "centroid_paths.svg", svg::path_plot("Centroid paths (PCA)", plotted));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput && e.code() != ErrorCode::PreconditionFailed) throw;
      ctx.err << "centroid path plot skipped: " << e.what() << '\n';
    }
  }
  for (const auto& s : report.steps) {
    ctx.out << "step " << s.step << ": clusters=" << s.num_clusters << " linear=" << (s.linear ? "true" : "false")
            << " similarity=" << (s.similarity_to_origin ? format_number(*s.similarity_to_origin) : "n/a") << '\n';
  }
  return kSuccess;
}

int cmd_crosstask(Context& ctx, const std::string& base_embv, const std::string& base_labels,
                  const std::string& tuned_embv, const std::string& tuned_labels) {
  const auto base = ctx.cluster_set(load_shared(base_embv, base_labels));
  const auto tuned = ctx.cluster_set(load_shared(tuned_embv, tuned_labels));
  const auto report = cross_task_report(base, tuned, ctx.cfg.threads);
  if (ctx.cfg.wants(Format::Json)) write_json(ctx.cfg.out / "crosstask.json", report);
  if (ctx.cfg.wants(Format::Csv)) {
    write_stream(ctx.cfg.out / "crosstask.csv", [&](std::ostream& os) { write_crosstask_csv(os, report); });
    write_stream(ctx.cfg.out / "crosstask_summary.csv",
                 [&](std::ostream& os) { write_crosstask_summary_csv(os, report); });
  }
  ctx.out << "#inc: " << report.num_increased << "\n#dec: " << report.num_decreased
          << "\naverage inc: " << format_number(report.average_change) << '\n';
  return kSuccess;
}

int cmd_probe(Context& ctx, const std::string& train_embv, const std::string& train_labels,
              const std::string& test_embv, const std::string& test_labels) {
  const auto train = load_point_set(train_embv, train_labels);
  const auto test = load_point_set(test_embv, test_labels);
  if (train.dim() != test.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "train dimension " + std::to_string(train.dim()) + " vs test " + std::to_string(test.dim()));
  }
  const auto grid = grid_search(train, ctx.cfg.probe_space, ctx.cfg.seed, ctx.cfg.threads);
  const auto model = train_and_evaluate(train, test, grid.best, ctx.cfg.seed, ctx.cfg.threads);
  save_probe_model(ctx.cfg.out / "probe_model.bin", model);

  if (ctx.cfg.wants(Format::Json)) {
    json cells = json::array();
    for (const auto& c : grid.cells) cells.push_back({{"config", c.config}, {"validation_accuracy", c.validation_accuracy}});
    write_json(ctx.cfg.out / "probe.json", {{"best_config", grid.best},
                                            {"best_validation_accuracy", grid.best_accuracy},
                                            {"per_seed_accuracies", model.per_seed_accuracies},
                                            {"mean_accuracy", model.mean_accuracy},
                                            {"std_accuracy", model.std_accuracy},
                                            {"grid", std::move(cells)}});
  }
  if (ctx.cfg.wants(Format::Csv)) {
    write_stream(ctx.cfg.out / "probe_grid.csv", [&](std::ostream& os) {
      os << "hidden1,hidden2,reg_weight,validation_accuracy\n";
      for (const auto& c : grid.cells) {
        os << c.config.hidden1 << ',' << c.config.hidden2 << ',' << format_number(c.config.reg_weight) << ','
           << format_number(c.validation_accuracy) << '\n';
      }
    });
  }
  ctx.out << "best: (" << grid.best.hidden1 << ", " << grid.best.hidden2 << ") reg " << format_number(grid.best.reg_weight)
          << "\naccuracy: " << format_number(model.mean_accuracy) << " +- " << format_number(model.std_accuracy) << '\n';
  return kSuccess;
}

}  // namespace

std::set<Format> parse_formats(const std::string& comma_separated) {
  std::set<Format> out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "json") {
      out.insert(Format::Json);
    } else if (item == "csv") {
      out.insert(Format::Csv);
    } else if (item == "svg") {
      out.insert(Format::Svg);
    } else if (!item.empty()) {
      throw Error(ErrorCode::InvalidArgument, "unknown format '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "at least one output format is required");
  return out;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, path.string() + ": expected a JSON object");

  RunConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epsilon") {
        cfg.separability.epsilon = value.get<double>();
      } else if (key == "gap_tol") {
        cfg.separability.gap_tol = value.get<double>();
      } else if (key == "max_iterations") {
        cfg.separability.max_iterations = value.get<std::int64_t>();
      } else if (key == "relative_eps") {
        cfg.separability.relative_eps = value.get<bool>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "threads") {
        cfg.threads = value.get<unsigned>();
      } else if (key == "out") {
        cfg.out = value.get<std::string>();
      } else if (key == "formats") {
        std::string joined;
        for (const auto& f : value) joined += f.get<std::string>() + ",";
        cfg.formats = parse_formats(joined);
      } else if (key == "top_k") {
        cfg.top_k = value.get<int>();
      } else if (key == "layer") {
        cfg.layer = value.get<int>();
      } else if (key == "probe") {
        from_json(value, cfg.probe_space.base);
        if (value.contains("hidden1")) cfg.probe_space.hidden1 = value["hidden1"].get<std::vector<int>>();
        if (value.contains("hidden2")) cfg.probe_space.hidden2 = value["hidden2"].get<std::vector<int>>();
        if (value.contains("reg_weights")) cfg.probe_space.reg_weights = value["reg_weights"].get<std::vector<double>>();
      } else {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometry probes for labeled embedding spaces", "geoprobe"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, formats;
  double eps = 0.0, gap_tol = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::int64_t max_iterations = 0;
  bool relative_eps = false;
  auto* o_config = app.add_option("--config", config_path, "JSON run configuration; flags override it");
  auto* o_eps = app.add_option("--eps", eps, "Hull overlap tolerance (default 1e-6)");
  auto* o_gap = app.add_option("--gap-tol", gap_tol, "Relative Frank-Wolfe duality-gap tolerance (default 1e-8)");
  auto* o_maxit = app.add_option("--max-iter", max_iterations, "Frank-Wolfe iteration cap (0 = automatic)");
  auto* o_rel = app.add_flag("--relative-eps", relative_eps, "Scale --eps by the mean point norm");
  auto* o_seed = app.add_option("--seed", seed, "Seed for every random choice");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_format = app.add_option("--format", formats, "Comma-separated subset of json,csv,svg");

  std::vector<std::string> positional;
  std::function<int(Context&)> action;

  auto* sc_cluster = app.add_subcommand("cluster", "Partition into label-pure, hull-disjoint clusters");
  sc_cluster->add_option("inputs", positional, "EMBV file and labels TSV")->required()->expected(2);
  sc_cluster->callback([&] { action = [&](Context& c) { return cmd_cluster(c, positional[0], positional[1]); }; });

  auto* sc_dist = app.add_subcommand("distances", "Cluster distance matrix, distance vector, minimum distances");
  sc_dist->add_option("inputs", positional, "EMBV file and labels TSV")->required()->expected(2);
  sc_dist->callback([&] { action = [&](Context& c) { return cmd_distances(c, positional[0], positional[1]); }; });

  auto* sc_sim = app.add_subcommand("similarity", "Pearson correlation of two distance vectors");
  sc_sim->add_option("inputs", positional, "EMBV_A LABELS_A EMBV_B LABELS_B")->required()->expected(4);
  sc_sim->callback([&] {
    action = [&](Context& c) { return cmd_similarity(c, positional[0], positional[1], positional[2], positional[3]); };
  });

  int top_k = 3, layer = 0;
  auto* sc_track = app.add_subcommand("track", "Distance and centroid dynamics over a snapshot series");
  sc_track->add_option("run_dir", positional, "Series directory")->required()->expected(1);
  auto* o_topk = sc_track->add_option("--top-k", top_k, "Labels plotted from each end of the change ranking");
  auto* o_layer = sc_track->add_option("--layer", layer, "Layer file to read from each step");
  sc_track->callback([&] { action = [&](Context& c) { return cmd_track(c, positional[0]); }; });

  auto* sc_cross = app.add_subcommand("crosstask", "Per-label minimum-distance changes between two spaces");
  sc_cross->add_option("inputs", positional, "BASE_EMBV BASE_LABELS TUNED_EMBV TUNED_LABELS")->required()->expected(4);
  sc_cross->callback([&] {
    action = [&](Context& c) { return cmd_crosstask(c, positional[0], positional[1], positional[2], positional[3]); };
  });

  std::string hidden1, hidden2, reg_weights;
  int reg_count = 8, probe_seeds = 5, epochs = 1000, batch = 0;
  double lr = 1e-3;
  auto* sc_probe = app.add_subcommand("probe", "Grid-searched MLP probe, mean and std accuracy over seeds");
  sc_probe->add_option("inputs", positional, "TRAIN_EMBV TRAIN_LABELS TEST_EMBV TEST_LABELS")->required()->expected(4);
  auto* o_h1 = sc_probe->add_option("--hidden1", hidden1, "First hidden sizes to search, e.g. 32,64");
  auto* o_h2 = sc_probe->add_option("--hidden2", hidden2, "Second hidden sizes to search");
  auto* o_regs = sc_probe->add_option("--reg-weights", reg_weights, "Explicit regularizer weights");
  auto* o_regc = sc_probe->add_option("--reg-count", reg_count, "Log-uniform regularizer weights in [1e-7, 1]");
  auto* o_pseeds = sc_probe->add_option("--probe-seeds", probe_seeds, "Training runs for the best cell");
  auto* o_epochs = sc_probe->add_option("--epochs", epochs, "Maximum training epochs");
  auto* o_batch = sc_probe->add_option("--batch-size", batch, "Mini-batch size (0 = min(200, N))");
  auto* o_lr = sc_probe->add_option("--lr", lr, "Adam learning rate");
  sc_probe->callback([&] {
    action = [&](Context& c) { return cmd_probe(c, positional[0], positional[1], positional[2], positional[3]); };
  });

  std::vector<const char*> argv{"geoprobe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageOrValidation;
  }

  try {
    RunConfig cfg = o_config->count() ? load_run_config(config_path) : RunConfig{};
    if (o_eps->count()) cfg.separability.epsilon = eps;
    if (o_gap->count()) cfg.separability.gap_tol = gap_tol;
    if (o_maxit->count()) cfg.separability.max_iterations = max_iterations;
    if (o_rel->count()) cfg.separability.relative_eps = relative_eps;
    if (o_seed->count()) cfg.seed = seed;
    if (o_threads->count()) cfg.threads = threads;
    if (o_out->count()) cfg.out = out_dir;
    if (o_format->count()) cfg.formats = parse_formats(formats);
    if (o_topk->count()) cfg.top_k = top_k;
    if (o_layer->count()) cfg.layer = layer;
    auto& space = cfg.probe_space;
    if (o_h1->count()) space.hidden1 = parse_list<int>(hidden1);
    if (o_h2->count()) space.hidden2 = parse_list<int>(hidden2);
    if (o_regc->count()) space.reg_weights = log_uniform_reg_weights(reg_count);
    if (o_regs->count()) space.reg_weights = parse_list<double>(reg_weights);
    if (o_pseeds->count()) space.base.seeds = probe_seeds;
    if (o_epochs->count()) space.base.max_iterations = epochs;
    if (o_batch->count()) space.base.batch_size = batch;
    if (o_lr->count()) space.base.learning_rate = lr;

    cfg.separability.validate();
    if (cfg.top_k < 1) throw Error(ErrorCode::InvalidArgument, "--top-k must be positive");
    fs::create_directories(cfg.out);
    Context ctx{std::move(cfg), out, err};
    return action(ctx);
  } catch (const IrreducibleOverlapError& e) {
    err << "error: " << e.what() << '\n';
    const auto& pairs = e.pairs();
    for (std::size_t i = 0; i < std::min<std::size_t>(pairs.size(), 10); ++i) {
      err << "  rows " << pairs[i].first << " and " << pairs[i].second << " at distance "
          << format_number(pairs[i].distance) << '\n';
    }
    return kUnsatisfiableData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageOrValidation;
  }
}

}  // namespace geoprobe::cli
