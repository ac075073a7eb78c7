#ifndef EDGEFIELD_METRICS_HPP
#define EDGEFIELD_METRICS_HPP

#include <string>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/geometry.hpp"

namespace ef::metrics {

struct SampledCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> dirs;

  std::size_t size() const { return points.size(); }
};

/// One representative per occupied voxel of the resolution^3 grid over
/// [-1,1]^3: the member nearest the voxel's centroid, carrying its direction.
SampledCloud downsample(const SampledCloud& cloud, int resolution = 256);

/// Distances are reported in milliunits (1e-3 of the unit box side).
/// Thresholds for recall/precision/f-score are 5, 10, 20 milliunits.
struct MetricsReport {
  bool acc_defined = true;  // false when the prediction is empty
  double acc = 0.0;         // mean nn distance prediction -> ground truth
  double comp = 0.0;        // mean nn distance ground truth -> prediction
  double norm = 0.0;        // 100 * mean |cos| of matched directions
  double r[3] = {0, 0, 0};  // recall at tau = 5, 10, 20
  double p[3] = {0, 0, 0};
  double f[3] = {0, 0, 0};
  std::size_t pred_samples = 0;
  std::size_t gt_samples = 0;
};

SampledCloud sample_edges(const geom::EdgeSet& set, double spacing);

/// Sample both sets, voxel-downsample independently, then chamfer-style
/// statistics. An empty prediction yields comp = inf, r = p = f = 0 and an
/// undefined acc; an empty ground truth is rejected.
MetricsReport compute_metrics(const geom::EdgeSet& pred, const geom::EdgeSet& gt,
                              double spacing = 0.002);

std::string report_to_json(const MetricsReport& r);
void save_report(const std::string& path, const MetricsReport& r);

}  // namespace ef::metrics

#endif
