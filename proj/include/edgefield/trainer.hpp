#ifndef EDGEFIELD_TRAINER_HPP
#define EDGEFIELD_TRAINER_HPP

#include <optional>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/field.hpp"
#include "edgefield/rendering.hpp"
#include "edgefield/scene.hpp"

namespace ef::train {

struct TrainConfig {
  int batch_rays = 1024;
  double edge_ray_fraction = 0.5;
  double lambda = 0.1;
  int iterations = 2000;
  double learning_rate = 1e-3;     // grid node values
  double learning_rate_bk = 1e-4;  // beta and k
  double edge_pixel_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct LossBreakdown {
  double edge_mse = 0.0;
  double eikonal = 0.0;
  double total = 0.0;
};

struct TrainRay {
  std::optional<scene::Ray> ray;  // empty when the pixel ray misses the box
  double target = 0.0;
};

/// Pixel pools for the 50/50 edge / non-edge ray sampler, built once per
/// view set. Pixels at or above the threshold count as edge pixels.
class RaySampler {
 public:
  RaySampler(const std::vector<scene::View>& views, double edge_pixel_threshold);
  std::vector<TrainRay> draw(int batch_rays, double edge_fraction, std::mt19937_64& rng) const;

 private:
  const std::vector<scene::View>& views_;
  std::vector<std::uint32_t> edge_pixels_;      // view << 24 | pixel index
  std::vector<std::uint32_t> non_edge_pixels_;
};

std::vector<TrainRay> sample_training_rays(const std::vector<scene::View>& views,
                                           const TrainConfig& cfg, std::mt19937_64& rng);

/// A batch with every stochastic choice materialized: per-ray sample depths
/// (importance sampling against the current field) and the uniform eikonal
/// probe points. Loss and gradient evaluations over a prepared batch are
/// deterministic functions of the grid parameters, which is what the
/// finite-difference check differentiates.
struct TrainBatch {
  std::vector<TrainRay> rays;
  std::vector<std::vector<double>> depths;  // per ray, empty when ray missed
  std::vector<Vec3> uniform_probes;         // same count as total ray samples
};

TrainBatch prepare_batch(const field::GridField& g, std::vector<TrainRay> rays,
                         std::mt19937_64& rng);

/// Per-ray visibility snapshot; gradients treat visibility as a constant, so
/// the finite-difference oracle evaluates the loss with this snapshot frozen.
std::vector<std::vector<double>> compute_psi(const field::GridField& g, const TrainBatch& batch);

LossBreakdown loss(const field::GridField& g, const TrainBatch& batch, const TrainConfig& cfg,
                   const std::vector<std::vector<double>>* frozen_psi = nullptr);

struct LossGradient {
  std::vector<double> nodes;  // dense, one entry per grid node
  double beta = 0.0;  // identically zero: beta only enters through the
                      // gradient-stopped visibility factor
  double k = 0.0;
  LossBreakdown value;
};

LossGradient loss_gradient(const field::GridField& g, const TrainBatch& batch,
                           const TrainConfig& cfg);

struct LossLogEntry {
  int iteration = 0;
  double edge_mse = 0.0;
  double eikonal = 0.0;
  double beta = 0.0;
  double k = 0.0;
};

/// Sphere-initialized grid optimized with Adam for cfg.iterations steps.
/// Throws NumericError with the failing iteration when the loss stops being
/// finite.
field::GridField fit_grid(const std::vector<scene::View>& views, int resolution,
                          const TrainConfig& cfg, std::vector<LossLogEntry>* log = nullptr);

}  // namespace ef::train

#endif
