#include "edgefield/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace ef::pipeline {

// ---------------------------------------------------------------------------
// Config parsing

namespace {

using Setter = std::function<void(PipelineConfig&, const std::string&)>;

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("bad number: " + v);
  return d;
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const int i = std::stoi(v, &used);
  if (used != v.size()) throw std::invalid_argument("bad integer: " + v);
  return i;
}

std::map<std::string, Setter> config_keys() {
  std::map<std::string, Setter> keys;
  auto d = [](auto member) {
    return [member](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = to_double(v); };
  };
  keys["/seed"] = [](PipelineConfig& c, const std::string& v) { c.seed = std::stoull(v); };

  keys["scene/recipe"] = [](PipelineConfig& c, const std::string& v) { c.scene.name = v; };
  keys["scene/views"] = [](PipelineConfig& c, const std::string& v) { c.scene.views = to_int(v); };
  keys["scene/width"] = [](PipelineConfig& c, const std::string& v) { c.scene.width = to_int(v); };
  keys["scene/height"] = [](PipelineConfig& c, const std::string& v) { c.scene.height = to_int(v); };
  keys["scene/sigma_px"] = d([](PipelineConfig& c) -> double& { return c.scene.sigma_px; });

  keys["train/batch_rays"] = [](PipelineConfig& c, const std::string& v) { c.train.batch_rays = to_int(v); };
  keys["train/edge_ray_fraction"] = d([](PipelineConfig& c) -> double& { return c.train.edge_ray_fraction; });
  keys["train/lambda"] = d([](PipelineConfig& c) -> double& { return c.train.lambda; });
  keys["train/iterations"] = [](PipelineConfig& c, const std::string& v) { c.train.iterations = to_int(v); };
  keys["train/learning_rate"] = d([](PipelineConfig& c) -> double& { return c.train.learning_rate; });
  keys["train/learning_rate_bk"] = d([](PipelineConfig& c) -> double& { return c.train.learning_rate_bk; });
  keys["train/edge_pixel_threshold"] = d([](PipelineConfig& c) -> double& { return c.train.edge_pixel_threshold; });
  keys["train/grid_resolution"] = [](PipelineConfig& c, const std::string& v) { c.train_grid = to_int(v); };

  keys["extract/eps_init"] = d([](PipelineConfig& c) -> double& { return c.extract.eps_init; });
  keys["extract/grid_m"] = [](PipelineConfig& c, const std::string& v) { c.extract.grid_m = to_int(v); };
  keys["extract/shift_iterations"] = [](PipelineConfig& c, const std::string& v) { c.extract.shift_iterations = to_int(v); };
  keys["extract/direction_probes"] = [](PipelineConfig& c, const std::string& v) { c.extract.direction_probes = to_int(v); };
  keys["extract/delta_range"] = d([](PipelineConfig& c) -> double& { return c.extract.delta_range; });
  keys["extract/d_t"] = d([](PipelineConfig& c) -> double& { return c.extract.d_t; });
  keys["extract/s_t"] = d([](PipelineConfig& c) -> double& { return c.extract.s_t; });
  keys["extract/n_r"] = d([](PipelineConfig& c) -> double& { return c.extract.n_r; });
  keys["extract/stability_min"] = d([](PipelineConfig& c) -> double& { return c.extract.stability_min; });

  keys["fit/min_line_inliers"] = [](PipelineConfig& c, const std::string& v) { c.fit.min_line_inliers = to_int(v); };
  keys["fit/min_bezier_points"] = [](PipelineConfig& c, const std::string& v) { c.fit.min_bezier_points = to_int(v); };
  keys["fit/ransac_inlier_tol"] = d([](PipelineConfig& c) -> double& { return c.fit.ransac_inlier_tol; });
  keys["fit/ransac_iters"] = [](PipelineConfig& c, const std::string& v) { c.fit.ransac_iters = to_int(v); };
  keys["fit/d_s"] = d([](PipelineConfig& c) -> double& { return c.fit.d_s; });
  keys["fit/s_c"] = d([](PipelineConfig& c) -> double& { return c.fit.s_c; });
  keys["fit/d_e"] = d([](PipelineConfig& c) -> double& { return c.fit.d_e; });
  keys["fit/refine_support_prob"] = d([](PipelineConfig& c) -> double& { return c.fit.refine_support_prob; });
  keys["fit/refine_visible_frac"] = d([](PipelineConfig& c) -> double& { return c.fit.refine_visible_frac; });

  keys["eval/spacing"] = d([](PipelineConfig& c) -> double& { return c.eval_spacing; });
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  const auto keys = config_keys();
  PipelineConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scene" && section != "train" && section != "extract" && section != "fit" &&
          section != "eval")
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = section + "/" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key " + key);
    it->second(cfg, value);
  }
  return finalize(cfg);
}

PipelineConfig finalize(PipelineConfig cfg) {
  // Fitting tolerances default to fractions of the extraction seeding cell.
  cfg.fit.grid_m = cfg.extract.grid_m;
  return cfg;
}

// ---------------------------------------------------------------------------
// Stages

geom::EdgeSet extract_parametric_edges(const field::UdfField& f,
                                       const std::vector<scene::View>& views,
                                       const PipelineConfig& cfg, const StageFlags& flags) {
  extract::ExtractConfig ecfg = cfg.extract;
  if (flags.no_shift) ecfg.shift_iterations = 0;

  auto rng_extract = make_rng(stage_seed(cfg.seed, "extract"));
  const auto points = extract::extract_oriented_points(f, ecfg, rng_extract);
  if (points.empty()) return {};

  auto rng_connect = make_rng(stage_seed(cfg.seed, "connect"));
  const auto polylines = extract::connect_points(points, ecfg, rng_connect);

  auto rng_fit = make_rng(stage_seed(cfg.seed, "fit-edges"));
  std::vector<fit::FittedEdge> edges;
  for (const auto& poly : polylines) {
    auto fitted = fit::fit_polyline(poly, cfg.fit, rng_fit, !flags.no_bezier);
    for (auto& e : fitted) edges.push_back(std::move(e));
  }
  if (!flags.no_merge) edges = fit::merge_edges(std::move(edges), cfg.fit);

  geom::EdgeSet set;
  if (flags.no_endpoints) {
    for (std::size_t i = 0; i < edges.size(); ++i) set.edges.push_back({int(i), edges[i].shape});
  } else {
    set = fit::merge_endpoints(edges, cfg.fit);
  }
  if (!flags.no_refine && !views.empty()) set = fit::refine_edges(set, views, cfg.fit);
  return set;
}

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::invalid_argument("stage " + name + ": " + e.what());
  }
}

}  // namespace

PipelineResult run_pipeline(const scene::Scene& sc, const PipelineConfig& cfg,
                            const StageFlags& flags, const std::string& out_dir) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const auto persist = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  std::unique_ptr<field::UdfField> f;
  if (flags.analytic_field) {
    if (sc.gt.empty())
      throw std::invalid_argument("pipeline: analytic field requested but scene has no ground truth");
    f = std::make_unique<field::AnalyticField>(sc.gt);
  } else {
    f = stage("train", [&] {
      train::TrainConfig tcfg = cfg.train;
      tcfg.seed = stage_seed(cfg.seed, "train");
      std::vector<train::LossLogEntry> log;
      auto grid = std::make_unique<field::GridField>(
          train::fit_grid(sc.views, cfg.train_grid, tcfg, &log));
      if (!out_dir.empty()) {
        field::save_grid(persist("field.udfg"), *grid);
        std::ofstream csv(persist("loss.csv"));
        csv << "iteration,edge_mse,eikonal,beta,k\n";
        for (const auto& e : log)
          csv << e.iteration << ',' << e.edge_mse << ',' << e.eikonal << ',' << e.beta << ',' << e.k
              << '\n';
      }
      return std::unique_ptr<field::UdfField>(std::move(grid));
    });
  }

  PipelineResult result;
  result.pred = stage("extract", [&] { return extract_parametric_edges(*f, sc.views, cfg, flags); });
  if (!out_dir.empty()) geom::save_edge_set(persist("pred.edges"), result.pred);

  result.report = stage("eval", [&] { return metrics::compute_metrics(result.pred, sc.gt, cfg.eval_spacing); });
  if (!out_dir.empty()) metrics::save_report(persist("report.json"), result.report);
  return result;
}

}  // namespace ef::pipeline
