#ifndef EDGEFIELD_SCENE_HPP
#define EDGEFIELD_SCENE_HPP

#include <optional>
#include <string>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/geometry.hpp"

namespace ef::scene {

/// Pinhole camera, world-to-camera convention x_cam = R x_world + t.
/// The camera looks down +z in its own frame, image y points down.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rotation{Mat3::Identity()};
  Vec3 translation{Vec3::Zero()};
  int width = 0, height = 0;

  Vec3 center() const { return -rotation.transpose() * translation; }
};

struct Ray {
  Vec3 origin{Vec3::Zero()};
  Vec3 direction{Vec3::UnitZ()};
  double t_near = 0.0;
  double t_far = 0.0;
};

struct EdgeMap {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major, [0,1]

  double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
  double& at(int x, int y) { return values[std::size_t(y) * width + x]; }
};

struct View {
  Camera camera;
  EdgeMap edge_map;
};

struct Projection {
  double px = 0, py = 0;
  bool in_front = false;
};

/// Ray through the center of pixel (px, py), clipped against the unit box.
/// Empty when the ray misses the box; such pixels render to zero.
std::optional<Ray> pixel_ray(const Camera& cam, double px, double py);

Projection project(const Camera& cam, const Vec3& x);

/// Rasterize an edge set into an edge-probability map: Gaussian falloff
/// exp(-d^2 / 2 sigma^2) of the perpendicular pixel distance to the projected
/// edges, max over edges.
EdgeMap rasterize_edge_map(const geom::EdgeSet& set, const Camera& cam, double sigma_px);

struct SceneRecipe {
  std::string name = "cube-wireframe";  // cube-wireframe | curve-plate | mixed
  int views = 50;
  int width = 128;
  int height = 128;
  double sigma_px = 1.0;
};

struct Scene {
  geom::EdgeSet gt;
  std::vector<View> views;
};

geom::EdgeSet builtin_edges(const std::string& recipe_name);

/// Ground-truth edges plus cameras on a radius-3 Fibonacci sphere looking at
/// the origin, each paired with a rasterized edge map.
Scene generate_scene(const SceneRecipe& recipe);

// ---------------------------------------------------------------------------
// Files: scene JSON (cameras + per-view edge map path + ground truth path)
// and 8-bit grayscale PGM edge maps. PGM round trips are bit exact.

void save_pgm(const std::string& path, const EdgeMap& map);
EdgeMap load_pgm(const std::string& path);

void save_scene(const std::string& dir, const Scene& scene);
Scene load_scene(const std::string& json_path);

}  // namespace ef::scene

#endif
