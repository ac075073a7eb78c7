#include "edgefield/scene.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "edgefield/field.hpp"
#include "oracles.hpp"

using namespace ef;
using scene::Camera;

namespace {

Camera down_z_camera() {
  // at (0,0,3) looking toward the origin along -z (world), y up in camera
  Camera cam;
  cam.width = cam.height = 128;
  cam.fx = cam.fy = 83.2;
  cam.cx = cam.cy = 64.0;
  cam.rotation << 1, 0, 0, 0, -1, 0, 0, 0, -1;  // world -z becomes camera +z
  cam.translation = -cam.rotation * Vec3(0, 0, 3);
  return cam;
}

}  // namespace

TEST_CASE("pixel ray through the principal point") {
  const Camera cam = down_z_camera();
  const auto ray = scene::pixel_ray(cam, 63.5, 63.5);  // center lands on (64, 64) = (cx, cy)
  REQUIRE(ray.has_value());
  CHECK(ray->direction.isApprox(Vec3(0, 0, -1), 1e-12));
  CHECK(ray->t_near == doctest::Approx(2.0));
  CHECK(ray->t_far == doctest::Approx(4.0));
  CHECK_THROWS_AS(scene::pixel_ray(cam, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("pixel rays start on the box boundary") {
  const auto sc = scene::generate_scene({"cube-wireframe", 4, 64, 64, 1.0});
  auto rng = oracles::rng(5);
  std::uniform_int_distribution<int> pix(0, 63);
  for (const auto& view : sc.views) {
    for (int i = 0; i < 50; ++i) {
      const auto ray = scene::pixel_ray(view.camera, pix(rng), pix(rng));
      if (!ray) continue;
      const Vec3 entry = ray->origin + ray->t_near * ray->direction;
      CHECK(entry.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("projection basics") {
  const Camera cam = down_z_camera();
  // a point one unit in front of the camera on the optical axis
  const auto p = scene::project(cam, Vec3(0, 0, 2));
  CHECK(p.in_front);
  CHECK(p.px == doctest::Approx(cam.cx));
  CHECK(p.py == doctest::Approx(cam.cy));
  CHECK(!scene::project(cam, Vec3(0, 0, 4)).in_front);  // behind
}

TEST_CASE("project inverts pixel_ray") {
  const auto sc = scene::generate_scene({"mixed", 3, 128, 128, 1.0});
  auto rng = oracles::rng(15);
  std::uniform_real_distribution<double> pix(0.0, 127.99);
  std::uniform_real_distribution<double> tuni(0.0, 1.0);
  for (const auto& view : sc.views) {
    for (int i = 0; i < 100; ++i) {
      const double px = pix(rng), py = pix(rng);
      const auto ray = scene::pixel_ray(view.camera, px, py);
      if (!ray) continue;
      const double t = ray->t_near + tuni(rng) * (ray->t_far - ray->t_near);
      const auto back = scene::project(view.camera, ray->origin + t * ray->direction);
      CHECK(back.in_front);
      CHECK(back.px == doctest::Approx(px + 0.5).epsilon(1e-6));
      CHECK(back.py == doctest::Approx(py + 0.5).epsilon(1e-6));
    }
  }
}

TEST_CASE("rasterized edge map values") {
  geom::EdgeSet set;
  set.edges.push_back({0, geom::LineSegment{Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)}});
  const auto sc = scene::generate_scene({"cube-wireframe", 1, 128, 128, 1.0});
  const Camera cam = sc.views[0].camera;

  SUBCASE("empty set renders black") {
    const auto map = scene::rasterize_edge_map(geom::EdgeSet{}, cam, 1.0);
    for (double v : map.values) CHECK(v == 0.0);
  }
  SUBCASE("pixels on the projected edge saturate, falloff follows the Gaussian") {
    // segment placed so its projection runs exactly through the centers of
    // pixel row 63 of the axis-aligned camera
    const Camera axis_cam = down_z_camera();
    const double y0 = -0.5 * 3.0 / axis_cam.fy;
    geom::EdgeSet row;
    row.edges.push_back({0, geom::LineSegment{Vec3(-0.5, y0, 0), Vec3(0.5, y0, 0)}});
    const double sigma = 1.5;
    const auto map = scene::rasterize_edge_map(row, axis_cam, sigma);
    // the camera flips world y, so the row lands at image y = 64.5
    CHECK(map.at(64, 64) >= 0.99);
    // two sigmas below the line: rows are one pixel apart
    const double expected = std::exp(-2.0);
    CHECK(std::abs(map.at(64, 67) - expected) < 0.05);
  }
}

TEST_CASE("builtin recipes") {
  const auto cube = scene::builtin_edges("cube-wireframe");
  CHECK(cube.size() == 12);
  for (const auto& rec : cube.edges) {
    const auto& seg = std::get<geom::LineSegment>(rec.shape);
    CHECK(seg.a.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
    CHECK(seg.b.cwiseAbs().maxCoeff() == doctest::Approx(0.5));
  }
  const auto mixed = scene::builtin_edges("mixed");
  int lines = 0, curves = 0;
  for (const auto& rec : mixed.edges)
    std::holds_alternative<geom::LineSegment>(rec.shape) ? ++lines : ++curves;
  CHECK(lines >= 1);
  CHECK(curves >= 1);
  CHECK_THROWS_AS(scene::builtin_edges("bogus"), std::invalid_argument);
}

TEST_CASE("all ground truth points project inside every view") {
  for (const char* recipe : {"cube-wireframe", "mixed", "curve-plate"}) {
    const auto sc = scene::generate_scene({recipe, 20, 128, 128, 1.0});
    const auto samples = geom::sample_edge_points(sc.gt, 0.01);
    for (const auto& view : sc.views) {
      for (const auto& s : samples) {
        const auto p = scene::project(view.camera, s.pos);
        CHECK(p.in_front);
        CHECK(p.px >= 0);
        CHECK(p.px < view.camera.width);
        CHECK(p.py >= 0);
        CHECK(p.py < view.camera.height);
      }
    }
  }
}

TEST_CASE("edge maps are view-consistent with the exact distance field") {
  const auto sc = scene::generate_scene({"mixed", 6, 128, 128, 1.0});
  const field::AnalyticField f(sc.gt);
  std::size_t strong = 0, consistent = 0;
  for (const auto& view : sc.views) {
    for (int y = 0; y < view.edge_map.height; y += 2)
      for (int x = 0; x < view.edge_map.width; x += 2) {
        if (view.edge_map.at(x, y) <= 0.9) continue;
        ++strong;
        const auto ray = scene::pixel_ray(view.camera, x, y);
        if (!ray) continue;
        double best_u = 1e30, best_t = 0;
        for (int i = 0; i <= 2048; ++i) {
          const double t = ray->t_near + (ray->t_far - ray->t_near) * i / 2048.0;
          const double u = f.query(ray->origin + t * ray->direction).u;
          if (u < best_u) {
            best_u = u;
            best_t = t;
          }
        }
        const double footprint = best_t / view.camera.fx;  // box units per pixel at depth
        if (best_u < 2.0 * 1.0 * footprint) ++consistent;
      }
  }
  CHECK(strong > 100);
  CHECK(double(consistent) / double(strong) >= 0.95);
}

TEST_CASE("PGM round trip is bit exact") {
  auto rng = oracles::rng(25);
  scene::EdgeMap map;
  map.width = 33;
  map.height = 17;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  map.values.resize(33 * 17);
  for (auto& v : map.values) v = uni(rng);
  const auto dir = std::filesystem::temp_directory_path() / "ef_pgm_test";
  std::filesystem::create_directories(dir);
  const std::string p1 = (dir / "a.pgm").string();
  const std::string p2 = (dir / "b.pgm").string();
  scene::save_pgm(p1, map);
  scene::save_pgm(p2, scene::load_pgm(p1));
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}

TEST_CASE("scene save and load round trip") {
  const auto sc = scene::generate_scene({"cube-wireframe", 3, 64, 64, 1.0});
  const auto dir = (std::filesystem::temp_directory_path() / "ef_scene_test").string();
  scene::save_scene(dir, sc);
  const auto back = scene::load_scene(dir + "/scene.json");
  REQUIRE(back.views.size() == sc.views.size());
  CHECK(back.gt.size() == sc.gt.size());
  for (std::size_t i = 0; i < sc.views.size(); ++i) {
    CHECK((back.views[i].camera.rotation - sc.views[i].camera.rotation).norm() < 1e-12);
    CHECK((back.views[i].camera.translation - sc.views[i].camera.translation).norm() < 1e-12);
    CHECK(back.views[i].camera.fx == sc.views[i].camera.fx);
    // pixel values quantized to 8 bits
    for (std::size_t p = 0; p < sc.views[i].edge_map.values.size(); ++p)
      CHECK(std::abs(back.views[i].edge_map.values[p] - sc.views[i].edge_map.values[p]) <=
            0.5 / 255.0 + 1e-12);
  }
  CHECK_THROWS_AS(scene::load_scene(dir + "/nope.json"), std::invalid_argument);
}
