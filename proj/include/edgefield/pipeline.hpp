#ifndef EDGEFIELD_PIPELINE_HPP
#define EDGEFIELD_PIPELINE_HPP

#include <optional>
#include <string>

#include "edgefield/extraction.hpp"
#include "edgefield/field.hpp"
#include "edgefield/fitting.hpp"
#include "edgefield/metrics.hpp"
#include "edgefield/scene.hpp"
#include "edgefield/trainer.hpp"

namespace ef::pipeline {

struct PipelineConfig {
  scene::SceneRecipe scene;
  train::TrainConfig train;
  int train_grid = 64;  // field resolution fitted by the trainer
  extract::ExtractConfig extract;
  fit::FitConfig fit;
  double eval_spacing = 0.002;
  std::uint64_t seed = 42;
};

/// key = value sections ([scene], [train], [extract], [fit], [eval]) plus a
/// top-level seed. Unknown sections or keys are rejected.
PipelineConfig parse_config_file(const std::string& path);
PipelineConfig finalize(PipelineConfig cfg);  // ties fit tolerances to extract.grid_m

struct StageFlags {
  bool analytic_field = false;
  bool no_shift = false;
  bool no_bezier = false;
  bool no_merge = false;
  bool no_endpoints = false;
  bool no_refine = false;
};

/// Extraction + fitting chain: oriented points -> polylines -> primitives ->
/// merging -> endpoint merging -> 2D-support refinement.
geom::EdgeSet extract_parametric_edges(const field::UdfField& f,
                                       const std::vector<scene::View>& views,
                                       const PipelineConfig& cfg, const StageFlags& flags);

struct PipelineResult {
  geom::EdgeSet pred;
  metrics::MetricsReport report;
};

/// Full round trip: (train | analytic field) -> extraction -> evaluation
/// against the scene's ground truth. When out_dir is nonempty every stage
/// artifact is persisted there. Stage errors carry the stage name.
PipelineResult run_pipeline(const scene::Scene& sc, const PipelineConfig& cfg,
                            const StageFlags& flags, const std::string& out_dir = "");

}  // namespace ef::pipeline

#endif
