// Command-line driver: scene synthesis, field fitting, edge extraction,
// evaluation, the full pipeline, and a per-ray render dump.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "edgefield/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ef;

namespace {

Vec3 parse_vec3(const std::string& s) {
  Vec3 v;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x(), &v.y(), &v.z()) != 3)
    throw std::invalid_argument("expected x,y,z triple, got: " + s);
  return v;
}

pipeline::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return pipeline::finalize(pipeline::PipelineConfig{});
  return pipeline::parse_config_file(path);
}

std::unique_ptr<field::UdfField> open_field(const std::string& grid_path,
                                            const std::string& analytic_path) {
  if (!grid_path.empty() && !analytic_path.empty())
    throw std::invalid_argument("give either --field or --analytic, not both");
  if (!grid_path.empty())
    return std::make_unique<field::GridField>(field::load_grid(grid_path));
  if (!analytic_path.empty())
    return std::make_unique<field::AnalyticField>(geom::load_edge_set(analytic_path));
  throw std::invalid_argument("one of --field or --analytic is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric 3D edge reconstruction from multi-view edge maps"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  struct {
    std::string recipe = "mixed";
    int views = 50;
    int res = 128;
    double sigma = 1.0;
    std::string out;
  } sy;
  synth->add_option("--recipe", sy.recipe, "cube-wireframe | curve-plate | mixed");
  synth->add_option("--views", sy.views);
  synth->add_option("--res", sy.res, "image width and height");
  synth->add_option("--sigma", sy.sigma, "edge blur in pixels");
  synth->add_option("--out", sy.out, "output directory")->required();

  // --- fit -----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "fit a grid field to a scene");
  struct {
    std::string scene;
    std::string out = "field.udfg";
    std::string log;
    std::string config;
    int grid = 64;
    int iterations = 2000;
    double lambda = 0.1;
    std::uint64_t seed = 42;
  } ft;
  fit_cmd->add_option("--scene", ft.scene, "scene.json")->required();
  fit_cmd->add_option("--out", ft.out, "output grid file");
  fit_cmd->add_option("--log", ft.log, "loss CSV path");
  fit_cmd->add_option("--config", ft.config, "config file");
  fit_cmd->add_option("--grid", ft.grid, "field resolution M");
  fit_cmd->add_option("--iterations", ft.iterations);
  fit_cmd->add_option("--lambda", ft.lambda, "eikonal weight");
  fit_cmd->add_option("--seed", ft.seed);

  // --- extract ---------------------------------------------------------------
  auto* ex_cmd = app.add_subcommand("extract", "extract parametric edges from a field");
  struct {
    std::string field_path, analytic, scene, out = "pred.edges", ply, config;
    std::uint64_t seed = 42;
    bool no_shift = false, no_bezier = false, no_merge = false, no_endpoints = false,
         no_refine = false;
  } ex;
  ex_cmd->add_option("--field", ex.field_path, "grid field file");
  ex_cmd->add_option("--analytic", ex.analytic, "edge set file for an analytic field");
  ex_cmd->add_option("--scene", ex.scene, "scene.json (enables 2D-support refinement)");
  ex_cmd->add_option("--out", ex.out, "output edge set file");
  ex_cmd->add_option("--ply", ex.ply, "dump oriented points to PLY");
  ex_cmd->add_option("--config", ex.config, "config file");
  ex_cmd->add_option("--seed", ex.seed);
  ex_cmd->add_flag("--no-shift", ex.no_shift, "skip point shifting");
  ex_cmd->add_flag("--no-bezier", ex.no_bezier, "fit lines only");
  ex_cmd->add_flag("--no-merge", ex.no_merge, "skip edge merging");
  ex_cmd->add_flag("--no-endpoints", ex.no_endpoints, "skip endpoint merging");
  ex_cmd->add_flag("--no-refine", ex.no_refine, "skip 2D-support refinement");

  // --- eval ------------------------------------------------------------------
  auto* ev_cmd = app.add_subcommand("eval", "compare two edge sets");
  struct {
    std::string pred, gt, out;
    double spacing = 0.002;
  } ev;
  ev_cmd->add_option("--pred", ev.pred)->required();
  ev_cmd->add_option("--gt", ev.gt)->required();
  ev_cmd->add_option("--out", ev.out, "report JSON path (default stdout)");
  ev_cmd->add_option("--spacing", ev.spacing, "sampling spacing in box units");

  // --- pipeline ----------------------------------------------------------------
  auto* pl_cmd = app.add_subcommand("pipeline", "scene -> field -> edges -> metrics");
  struct {
    std::string scene, out, config;
    std::uint64_t seed = 42;
    bool analytic = false, no_shift = false, no_bezier = false, no_merge = false,
         no_endpoints = false, no_refine = false;
  } pl;
  pl_cmd->add_option("--scene", pl.scene, "scene.json")->required();
  pl_cmd->add_option("--out", pl.out, "output directory")->required();
  pl_cmd->add_option("--config", pl.config, "config file");
  pl_cmd->add_option("--seed", pl.seed);
  pl_cmd->add_flag("--analytic-field", pl.analytic, "use the exact field of the ground truth");
  pl_cmd->add_flag("--no-shift", pl.no_shift);
  pl_cmd->add_flag("--no-bezier", pl.no_bezier);
  pl_cmd->add_flag("--no-merge", pl.no_merge);
  pl_cmd->add_flag("--no-endpoints", pl.no_endpoints);
  pl_cmd->add_flag("--no-refine", pl.no_refine);

  // --- render-debug --------------------------------------------------------
  auto* rd_cmd = app.add_subcommand("render-debug", "per-ray CSV of t, u, psi, sigma, weight");
  struct {
    std::string field_path, analytic, origin, dir, out;
    double beta = 20.0, k = 20.0;
    std::uint64_t seed = 42;
    bool biased = false;
  } rd;
  rd_cmd->add_option("--field", rd.field_path);
  rd_cmd->add_option("--analytic", rd.analytic, "edge set file for an analytic field");
  rd_cmd->add_option("--origin", rd.origin, "ray origin x,y,z")->required();
  rd_cmd->add_option("--dir", rd.dir, "ray direction x,y,z")->required();
  rd_cmd->add_option("--out", rd.out, "CSV path (default stdout)");
  rd_cmd->add_option("--beta", rd.beta);
  rd_cmd->add_option("--k", rd.k);
  rd_cmd->add_option("--seed", rd.seed);
  rd_cmd->add_flag("--biased", rd.biased, "use the naive density reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);

    if (synth->parsed()) {
      scene::SceneRecipe recipe;
      recipe.name = sy.recipe;
      recipe.views = sy.views;
      recipe.width = recipe.height = sy.res;
      recipe.sigma_px = sy.sigma;
      scene::save_scene(sy.out, scene::generate_scene(recipe));
      std::cout << "wrote scene to " << sy.out << "\n";
    } else if (fit_cmd->parsed()) {
      auto cfg = load_config(ft.config);
      auto sc = scene::load_scene(ft.scene);
      train::TrainConfig tcfg = cfg.train;
      tcfg.iterations = ft.iterations;
      tcfg.lambda = ft.lambda;
      tcfg.seed = stage_seed(ft.seed, "train");
      std::vector<train::LossLogEntry> log;
      const auto grid = train::fit_grid(sc.views, ft.grid, tcfg, &log);
      field::save_grid(ft.out, grid);
      if (!ft.log.empty()) {
        std::ofstream csv(ft.log);
        csv << "iteration,edge_mse,eikonal,beta,k\n";
        for (const auto& e : log)
          csv << e.iteration << ',' << e.edge_mse << ',' << e.eikonal << ',' << e.beta << ','
              << e.k << '\n';
      }
      std::cout << "wrote field to " << ft.out << "\n";
    } else if (ex_cmd->parsed()) {
      auto cfg = load_config(ex.config);
      cfg.seed = ex.seed;
      const auto f = open_field(ex.field_path, ex.analytic);
      std::vector<scene::View> views;
      if (!ex.scene.empty()) views = scene::load_scene(ex.scene).views;
      pipeline::StageFlags flags;
      flags.no_shift = ex.no_shift;
      flags.no_bezier = ex.no_bezier;
      flags.no_merge = ex.no_merge;
      flags.no_endpoints = ex.no_endpoints;
      flags.no_refine = ex.no_refine || views.empty();
      if (!ex.ply.empty()) {
        auto rng = make_rng(stage_seed(cfg.seed, "extract"));
        extract::save_ply(ex.ply, extract::extract_oriented_points(*f, cfg.extract, rng));
      }
      const auto edges = pipeline::extract_parametric_edges(*f, views, cfg, flags);
      geom::save_edge_set(ex.out, edges);
      std::cout << "wrote " << edges.size() << " edges to " << ex.out << "\n";
    } else if (ev_cmd->parsed()) {
      const auto report = metrics::compute_metrics(geom::load_edge_set(ev.pred),
                                                   geom::load_edge_set(ev.gt), ev.spacing);
      if (ev.out.empty())
        std::cout << metrics::report_to_json(report) << "\n";
      else
        metrics::save_report(ev.out, report);
    } else if (pl_cmd->parsed()) {
      auto cfg = load_config(pl.config);
      cfg.seed = pl.seed;
      const auto sc = scene::load_scene(pl.scene);
      pipeline::StageFlags flags;
      flags.analytic_field = pl.analytic;
      flags.no_shift = pl.no_shift;
      flags.no_bezier = pl.no_bezier;
      flags.no_merge = pl.no_merge;
      flags.no_endpoints = pl.no_endpoints;
      flags.no_refine = pl.no_refine;
      const auto result = pipeline::run_pipeline(sc, cfg, flags, pl.out);
      std::cout << metrics::report_to_json(result.report) << "\n";
    } else if (rd_cmd->parsed()) {
      const auto f = open_field(rd.field_path, rd.analytic);
      render::RenderParams params;
      params.beta = rd.beta;
      params.k = rd.k;
      if (const auto* g = dynamic_cast<const field::GridField*>(f.get())) {
        params.beta = g->beta;
        params.k = g->k;
      }
      scene::Ray ray;
      ray.origin = parse_vec3(rd.origin);
      ray.direction = parse_vec3(rd.dir).normalized();
      // clip against the unit box the same way pixel rays are
      double t0 = -1e30, t1 = 1e30;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(ray.direction[i]) < 1e-15) continue;
        double a = (-1 - ray.origin[i]) / ray.direction[i];
        double b = (1 - ray.origin[i]) / ray.direction[i];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
      }
      if (t1 <= t0) throw std::invalid_argument("ray misses the unit box");
      ray.t_near = std::max(t0, 1e-4);
      ray.t_far = t1;

      auto rng = make_rng(rd.seed);
      const auto samples = render::sample_ray(*f, ray, params, rng);
      const auto result =
          rd.biased ? render::render_edge_biased(samples, params) : render::render_edge(samples, params);
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!rd.out.empty()) {
        file.open(rd.out);
        if (!file) throw std::invalid_argument("cannot write CSV: " + rd.out);
        out = &file;
      }
      (*out) << "t,u,psi,sigma,weight\n";
      out->precision(10);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double sigma = i < result.sigma.size() ? result.sigma[i] : 0.0;
        const double weight = i < result.weights.size() ? result.weights[i] : 0.0;
        (*out) << samples.t[i] << ',' << samples.u[i] << ',' << result.psi[i] << ',' << sigma
               << ',' << weight << '\n';
      }
      if (!rd.out.empty()) std::cout << "e_hat " << result.e_hat << "\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
