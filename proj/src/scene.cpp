#include "edgefield/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ef::scene {

namespace {

std::optional<std::pair<double, double>> intersect_unit_box(const Vec3& o, const Vec3& d) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < -1 || o[i] > 1) return std::nullopt;
      continue;
    }
    double a = (-1 - o[i]) / d[i];
    double b = (1 - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t1 <= t0) return std::nullopt;
  return std::make_pair(t0, t1);
}

double dist_point_segment_2d(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  const double s = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (a + s * d - p).norm();
}

}  // namespace

std::optional<Ray> pixel_ray(const Camera& cam, double px, double py) {
  if (!(px >= 0 && px < cam.width && py >= 0 && py < cam.height))
    throw std::invalid_argument("pixel_ray: pixel outside image");
  const Vec3 dir_cam((px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0);
  Ray r;
  r.origin = cam.center();
  r.direction = (cam.rotation.transpose() * dir_cam).normalized();
  const auto hit = intersect_unit_box(r.origin, r.direction);
  if (!hit) return std::nullopt;
  r.t_near = std::max(hit->first, 1e-4);
  r.t_far = hit->second;
  if (r.t_far <= r.t_near) return std::nullopt;
  return r;
}

Projection project(const Camera& cam, const Vec3& x) {
  const Vec3 xc = cam.rotation * x + cam.translation;
  Projection p;
  p.in_front = xc.z() > 1e-6;
  const double z = p.in_front ? xc.z() : 1e-6;
  p.px = cam.fx * xc.x() / z + cam.cx;
  p.py = cam.fy * xc.y() / z + cam.cy;
  return p;
}

EdgeMap rasterize_edge_map(const geom::EdgeSet& set, const Camera& cam, double sigma_px) {
  if (!(sigma_px > 0)) throw std::invalid_argument("rasterize_edge_map: sigma must be > 0");
  EdgeMap map;
  map.width = cam.width;
  map.height = cam.height;
  map.values.assign(std::size_t(cam.width) * cam.height, 0.0);
  if (set.empty()) return map;

  // World-space sample spacing chosen so projected gaps stay below half a
  // pixel at the closest possible depth.
  const double z_min = std::max(0.1, cam.center().norm() - std::sqrt(3.0));
  const double spacing = 0.45 * z_min / std::max(cam.fx, cam.fy);
  const double radius = 4.0 * sigma_px;
  const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);

  for (const auto& rec : set.edges) {
    geom::EdgeSet one;
    one.edges.push_back(rec);
    const auto samples = geom::sample_edge_points(one, spacing);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      const Projection pa = project(cam, samples[i].pos);
      const Projection pb = project(cam, samples[i + 1].pos);
      if (!pa.in_front || !pb.in_front) continue;
      const Vec2 a(pa.px, pa.py), b(pb.px, pb.py);
      const int x0 = std::max(0, int(std::floor(std::min(a.x(), b.x()) - radius)));
      const int x1 = std::min(cam.width - 1, int(std::ceil(std::max(a.x(), b.x()) + radius)));
      const int y0 = std::max(0, int(std::floor(std::min(a.y(), b.y()) - radius)));
      const int y1 = std::min(cam.height - 1, int(std::ceil(std::max(a.y(), b.y()) + radius)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double d = dist_point_segment_2d(Vec2(x + 0.5, y + 0.5), a, b);
          const double v = std::exp(-d * d * inv2s2);
          double& cell = map.at(x, y);
          if (v > cell) cell = std::min(v, 1.0);
        }
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Builtin ground-truth sets

namespace {

geom::EdgeSet cube_wireframe() {
  geom::EdgeSet set;
  const double h = 0.5;
  const Vec3 v[8] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                     {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
  const int e[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                        {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (int i = 0; i < 12; ++i)
    set.edges.push_back({i, geom::LineSegment{v[e[i][0]], v[e[i][1]]}});
  return set;
}

// Four arcs with out-of-plane twist. The twist keeps any short run of chain
// points off a common line, so the curves survive line extraction intact,
// while the bending radius stays gentle enough for direction-guided growth.
std::vector<geom::CubicBezier> face_arcs() {
  geom::CubicBezier base;
  base.p[0] = Vec3(0.55, -0.18, -0.10);
  base.p[1] = Vec3(0.72, -0.06, 0.10);
  base.p[2] = Vec3(0.72, 0.06, -0.10);
  base.p[3] = Vec3(0.55, 0.18, 0.10);
  std::vector<geom::CubicBezier> arcs;
  for (int q = 0; q < 4; ++q) {
    geom::CubicBezier c = base;
    for (auto& p : c.p) {
      for (int r = 0; r < q; ++r) p = Vec3(-p.y(), p.x(), p.z());  // rotate 90 deg about z
    }
    arcs.push_back(c);
  }
  return arcs;
}

geom::EdgeSet mixed_scene() {
  geom::EdgeSet set = cube_wireframe();
  int id = int(set.edges.size());
  for (const auto& arc : face_arcs()) set.edges.push_back({id++, geom::Edge(arc)});
  return set;
}

geom::EdgeSet curve_plate() {
  geom::EdgeSet set;
  const double h = 0.6;
  const Vec3 corners[4] = {{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}};
  for (int i = 0; i < 4; ++i)
    set.edges.push_back({i, geom::LineSegment{corners[i], corners[(i + 1) % 4]}});
  int id = 4;
  for (const auto& arc : geom::circle_beziers(Vec3(0, 0, 0), 0.35, Vec3::UnitX(), Vec3::UnitY()))
    set.edges.push_back({id++, geom::Edge(arc)});
  return set;
}

Camera look_at_camera(const Vec3& position, int width, int height) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.65 * width;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  const Vec3 z = (-position).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(z.dot(up)) > 0.999) up = Vec3::UnitY();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);  // image y points away from world up
  cam.rotation.row(0) = x;
  cam.rotation.row(1) = y;
  cam.rotation.row(2) = z;
  cam.translation = -cam.rotation * position;
  return cam;
}

}  // namespace

geom::EdgeSet builtin_edges(const std::string& name) {
  if (name == "cube-wireframe") return cube_wireframe();
  if (name == "curve-plate") return curve_plate();
  if (name == "mixed") return mixed_scene();
  throw std::invalid_argument("unknown scene recipe: " + name);
}

Scene generate_scene(const SceneRecipe& recipe) {
  Scene scene;
  scene.gt = builtin_edges(recipe.name);
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  for (int i = 0; i < recipe.views; ++i) {
    // Fibonacci lattice on the radius-3 sphere.
    const double z = 1.0 - 2.0 * (i + 0.5) / recipe.views;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * M_PI * i / golden;
    const Vec3 pos = 3.0 * Vec3(r * std::cos(phi), r * std::sin(phi), z);
    View view;
    view.camera = look_at_camera(pos, recipe.width, recipe.height);
    view.edge_map = rasterize_edge_map(scene.gt, view.camera, recipe.sigma_px);
    scene.views.push_back(std::move(view));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Files

void save_pgm(const std::string& path, const EdgeMap& map) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write PGM: " + path);
  f << "P5\n" << map.width << " " << map.height << "\n255\n";
  for (double v : map.values) {
    const int byte = int(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    f.put(char(byte));
  }
}

EdgeMap load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open PGM: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw std::invalid_argument("unsupported PGM: " + path);
  f.get();  // single whitespace after header
  EdgeMap map;
  map.width = w;
  map.height = h;
  map.values.resize(std::size_t(w) * h);
  for (auto& v : map.values) {
    const int byte = f.get();
    if (byte < 0) throw std::invalid_argument("truncated PGM: " + path);
    v = byte / 255.0;
  }
  return map;
}

void save_scene(const std::string& dir, const Scene& scene) {
  fs::create_directories(dir);
  json cams = json::array();
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const Camera& c = scene.views[i].camera;
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu.pgm", i);
    save_pgm((fs::path(dir) / name).string(), scene.views[i].edge_map);
    json jc;
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["width"] = c.width;
    jc["height"] = c.height;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) rot[r * 3 + col] = c.rotation(r, col);
    jc["rotation"] = rot;
    jc["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
    jc["edge_map"] = name;
    cams.push_back(jc);
  }
  json root;
  root["cameras"] = cams;
  if (!scene.gt.empty()) {
    geom::save_edge_set((fs::path(dir) / "gt.edges").string(), scene.gt);
    root["gt_edges"] = "gt.edges";
  }
  std::ofstream f(fs::path(dir) / "scene.json");
  if (!f) throw std::invalid_argument("cannot write scene.json in " + dir);
  f << root.dump(2) << '\n';
}

Scene load_scene(const std::string& json_path) {
  std::ifstream f(json_path);
  if (!f) throw std::invalid_argument("cannot open scene file: " + json_path);
  json root;
  try {
    f >> root;
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad scene JSON: " + std::string(e.what()));
  }
  const fs::path base = fs::path(json_path).parent_path();
  Scene scene;
  for (const auto& jc : root.at("cameras")) {
    View view;
    Camera& c = view.camera;
    c.fx = jc.at("fx");
    c.fy = jc.at("fy");
    c.cx = jc.at("cx");
    c.cy = jc.at("cy");
    c.width = jc.at("width");
    c.height = jc.at("height");
    const auto rot = jc.at("rotation").get<std::vector<double>>();
    if (rot.size() != 9) throw std::invalid_argument("scene camera rotation must have 9 entries");
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) c.rotation(r, col) = rot[r * 3 + col];
    const auto tr = jc.at("translation").get<std::vector<double>>();
    if (tr.size() != 3) throw std::invalid_argument("scene camera translation must have 3 entries");
    c.translation = Vec3(tr[0], tr[1], tr[2]);
    view.edge_map = load_pgm((base / jc.at("edge_map").get<std::string>()).string());
    if (view.edge_map.width != c.width || view.edge_map.height != c.height)
      throw std::invalid_argument("edge map size does not match camera");
    scene.views.push_back(std::move(view));
  }
  if (root.contains("gt_edges"))
    scene.gt = geom::load_edge_set((base / root.at("gt_edges").get<std::string>()).string());
  return scene;
}

}  // namespace ef::scene
