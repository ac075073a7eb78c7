#ifndef EDGEFIELD_EXTRACTION_HPP
#define EDGEFIELD_EXTRACTION_HPP

#include <optional>
#include <string>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/field.hpp"

namespace ef::extract {

struct OrientedEdgePoint {
  Vec3 pos{Vec3::Zero()};
  Vec3 dir{Vec3::UnitX()};  // edge direction, sign-free
  double stability = 0.0;   // singular value gap of the normal matrix
};

struct Polyline {
  std::vector<OrientedEdgePoint> points;
};

struct ExtractConfig {
  double eps_init = 0.02;   // keep seeds with u below this
  int grid_m = 128;         // seeding grid resolution
  int shift_iterations = 2;
  int direction_probes = 50;
  double delta_range = 5e-3;
  double d_t = 0.0;         // neighbor search radius; 0 resolves to 10/M
  double s_t = 0.97;        // direction similarity gate
  double n_r = 0.95;        // NMS ratio
  double stability_min = 1e-3;
  std::uint64_t seed = 0;

  double dt() const { return d_t > 0 ? d_t : 10.0 / grid_m; }
};

/// Voxel centers of the M^3 partition of [-1,1]^3 whose field value is at
/// most eps_init, in scan order (x fastest).
std::vector<Vec3> init_points(const field::UdfField& f, const ExtractConfig& cfg);

/// Iterative projection toward the zero set: x <- x - u * grad/|grad|.
/// Points hitting a degenerate gradient are dropped and counted.
std::vector<Vec3> shift_points(std::vector<Vec3> points, const field::UdfField& f,
                               int iterations, std::size_t* dropped = nullptr);

/// One representative per occupied voxel (the lowest-u member).
std::vector<Vec3> dedupe_points(const std::vector<Vec3>& points, const field::UdfField& f,
                                double voxel);

/// Edge direction as the null space of nearby inverse normals: probe N
/// offsets, stack the normals, take the right-singular vector of the
/// smallest singular value. Empty when fewer than 3 normals are valid.
std::optional<OrientedEdgePoint> edge_direction(const Vec3& x, const field::UdfField& f,
                                                const ExtractConfig& cfg, std::mt19937_64& rng);

struct ConnectStats {
  std::size_t input = 0;
  std::size_t visited = 0;    // ended up in a polyline
  std::size_t discarded = 0;  // suppressed or singleton seeds
};

/// Greedy direction-guided growth: random seeds, forward then backward
/// extension to the best-matching neighbor within d_t, with non-maximum
/// suppression of the other candidates examined at each step.
std::vector<Polyline> connect_points(const std::vector<OrientedEdgePoint>& pts,
                                     const ExtractConfig& cfg, std::mt19937_64& rng,
                                     ConnectStats* stats = nullptr);

/// init -> shift -> dedupe -> direction, dropping degenerate points.
std::vector<OrientedEdgePoint> extract_oriented_points(const field::UdfField& f,
                                                       const ExtractConfig& cfg,
                                                       std::mt19937_64& rng);

void save_ply(const std::string& path, const std::vector<OrientedEdgePoint>& pts);

}  // namespace ef::extract

#endif
