#ifndef EDGEFIELD_FITTING_HPP
#define EDGEFIELD_FITTING_HPP

#include <optional>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/extraction.hpp"
#include "edgefield/geometry.hpp"
#include "edgefield/scene.hpp"

namespace ef::fit {

struct FitConfig {
  int min_line_inliers = 5;
  int min_bezier_points = 4;
  double ransac_inlier_tol = 0.0;  // 0 resolves to 2/M
  int ransac_iters = 1000;
  double d_s = 0.0;  // merge distance gate, 0 -> 5/M
  double s_c = 0.98;  // merge direction gate
  double d_e = 0.0;  // endpoint cluster radius, 0 -> 2/M
  double refine_support_prob = 0.3;
  double refine_visible_frac = 0.1;
  int grid_m = 128;  // resolution the distance defaults derive from
  std::uint64_t seed = 0;

  double tol() const { return ransac_inlier_tol > 0 ? ransac_inlier_tol : 2.0 / grid_m; }
  double ds() const { return d_s > 0 ? d_s : 5.0 / grid_m; }
  double de() const { return d_e > 0 ? d_e : 2.0 / grid_m; }
};

/// Fitted primitive plus the points that supported it (used by merge refits).
struct FittedEdge {
  geom::Edge shape;
  std::vector<Vec3> support;
};

struct RansacLine {
  geom::LineSegment segment;
  std::vector<int> inliers;  // indices into the polyline
};

/// Best two-point line hypothesis by inlier count, re-estimated with PCA on
/// the inliers; endpoints are the extreme projections. Empty when no
/// hypothesis reaches min_line_inliers.
std::optional<RansacLine> ransac_line(const extract::Polyline& poly, const FitConfig& cfg,
                                      std::mt19937_64& rng);

/// Lines first, repeatedly, then one least-squares cubic Bezier per leftover
/// contiguous run of at least min_bezier_points points.
std::vector<FittedEdge> fit_polyline(const extract::Polyline& poly, const FitConfig& cfg,
                                     std::mt19937_64& rng, bool allow_bezier = true);

/// Merge same-type pairs that are close (<= d_s) and aligned (|cos| >= s_c)
/// at their nearest points, iterated to a fixpoint.
std::vector<FittedEdge> merge_edges(std::vector<FittedEdge> edges, const FitConfig& cfg);

/// Single-linkage endpoint clustering at d_e; every endpoint in a cluster
/// moves to the cluster centroid. Assigns sequential ids.
geom::EdgeSet merge_endpoints(const std::vector<FittedEdge>& edges, const FitConfig& cfg);

/// Drop edges whose projections find 2D edge-map support in fewer than
/// refine_visible_frac of the views.
geom::EdgeSet refine_edges(const geom::EdgeSet& edges, const std::vector<scene::View>& views,
                           const FitConfig& cfg);

}  // namespace ef::fit

#endif
