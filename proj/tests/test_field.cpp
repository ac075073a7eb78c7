#include "edgefield/field.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"

using namespace ef;
using field::AnalyticField;
using field::GridField;

namespace {

geom::EdgeSet x_axis_segment() {
  geom::EdgeSet set;
  set.edges.push_back({0, geom::LineSegment{Vec3(-0.8, 0, 0), Vec3(0.8, 0, 0)}});
  return set;
}

GridField random_grid(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.05, 0.8);
  std::vector<double> v(std::size_t(m) * m * m);
  for (auto& x : v) x = uni(rng);
  return GridField(m, std::move(v), 20.0, 20.0);
}

}  // namespace

TEST_CASE("analytic field value and gradient") {
  AnalyticField f(x_axis_segment());
  const auto q = f.query(Vec3(0, 1, 0));
  CHECK(q.u == doctest::Approx(1.0));
  CHECK(q.grad.isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("analytic field is eikonal and matches finite differences") {
  auto rng = oracles::rng(7);
  geom::EdgeSet set = x_axis_segment();
  geom::CubicBezier arc = geom::circle_beziers(Vec3(0, 0, 0.4), 0.3, Vec3::UnitX(), Vec3::UnitY())[0];
  set.edges.push_back({1, geom::Edge(arc)});
  AnalyticField f(set);
  int checked = 0;
  for (int i = 0; i < 5000 && checked < 1000; ++i) {
    const Vec3 x = oracles::random_box_point(rng, 0.9);
    const auto q = f.query(x);
    if (q.u < 1e-3) continue;
    // skip points near the medial surface where the gradient jumps
    const double d0 = geom::nearest_on_edge(set.edges[0].shape, x).dist;
    const double d1 = geom::nearest_on_edge(set.edges[1].shape, x).dist;
    if (std::abs(d0 - d1) < 1e-2) continue;
    ++checked;
    CHECK(std::abs(q.grad.norm() - 1.0) < 1e-9);
    CHECK((q.grad - oracles::fd_gradient(f, x)).norm() < 1e-4);
  }
  CHECK(checked == 1000);
}

TEST_CASE("sphere initialization") {
  const GridField g = GridField::init_sphere(16, 0.5);
  CHECK(g.beta == doctest::Approx(20.0));
  CHECK(g.k == doctest::Approx(20.0));
  // value at a node equals | |node| - radius |
  CHECK(g.query(g.node_position(0, 0, 0)).u == doctest::Approx(std::sqrt(3.0) - 0.5));
  const auto mid = g.node_position(8, 8, 8);
  CHECK(g.query(mid).u == doctest::Approx(std::abs(mid.norm() - 0.5)));

  // near-eikonal away from the center and the box boundary
  auto rng = oracles::rng(17);
  const GridField g64 = GridField::init_sphere(64, 0.5);
  double err = 0;
  int n = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 x = oracles::random_box_point(rng, 0.85);
    if (x.norm() < 0.1) continue;
    err += std::abs(oracles::fd_gradient(g64, x, 1e-6).norm() - 1.0);
    ++n;
  }
  CHECK(err / n < 0.05);
}

TEST_CASE("grid query basics") {
  auto rng = oracles::rng(27);
  SUBCASE("node values reproduced exactly") {
    GridField g = random_grid(9, rng);
    g.values()[g.node_index(3, 4, 5)] = 0.321;
    g.values()[g.node_index(0, 0, 0)] = -0.5;  // negative storage clamps to zero
    CHECK(g.query(g.node_position(3, 4, 5)).u == 0.321);
    CHECK(g.query(g.node_position(0, 0, 0)).u == 0.0);
    CHECK(g.query(g.node_position(8, 8, 8)).u == g.values()[g.node_index(8, 8, 8)]);
  }
  SUBCASE("constant grid") {
    GridField g(8, std::vector<double>(512, 0.25), 20, 20);
    for (int i = 0; i < 20; ++i) {
      const auto q = g.query(oracles::random_box_point(rng));
      CHECK(q.u == doctest::Approx(0.25));
      CHECK(q.grad.norm() < 1e-12);
    }
  }
  SUBCASE("u is never negative") {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> v(8 * 8 * 8);
    for (auto& x : v) x = uni(rng);
    GridField g(8, std::move(v), 20, 20);
    for (int i = 0; i < 500; ++i) CHECK(g.query(oracles::random_box_point(rng)).u >= 0.0);
  }
}

TEST_CASE("grid gradient matches finite differences inside cells") {
  auto rng = oracles::rng(37);
  GridField g = random_grid(12, rng);
  const double h = g.spacing();
  int checked = 0;
  while (checked < 200) {
    const Vec3 x = oracles::random_box_point(rng, 0.95);
    // stay away from cell faces where the interpolant kinks
    bool interior = true;
    for (int d = 0; d < 3; ++d) {
      const double s = (x[d] + 1.0) / h;
      if (std::abs(s - std::round(s)) * h < 2e-3) interior = false;
    }
    if (!interior) continue;
    ++checked;
    const auto q = g.query(x);
    CHECK((q.grad - oracles::fd_gradient(g, x, 1e-6)).norm() < 1e-6);
  }
}

TEST_CASE("grid query is continuous across cell faces") {
  auto rng = oracles::rng(47);
  GridField g = random_grid(10, rng);
  const double h = g.spacing();
  std::uniform_int_distribution<int> cell(1, 8);
  std::uniform_real_distribution<double> within(-0.9, 0.9);
  for (int i = 0; i < 300; ++i) {
    Vec3 x(within(rng), within(rng), within(rng));
    const int axis = int(rng() % 3);
    x[axis] = -1.0 + cell(rng) * h;  // exactly on a face
    Vec3 lo = x, hi = x;
    lo[axis] -= 1e-7;
    hi[axis] += 1e-7;
    CHECK(std::abs(g.query(lo).u - g.query(hi).u) < 1e-5);
  }
}

TEST_CASE("inverse normal") {
  AnalyticField f(x_axis_segment());
  const auto n = field::inverse_normal(f, Vec3(0, 1, 0));
  REQUIRE(n.has_value());
  CHECK(n->isApprox(Vec3(0, -1, 0), 1e-12));

  // x + u * n lands back on the edge
  auto rng = oracles::rng(57);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = oracles::random_box_point(rng, 0.7);
    const auto q = f.query(x);
    if (q.u < 1e-6) continue;
    const auto inv = field::inverse_normal(q);
    REQUIRE(inv.has_value());
    CHECK(f.query(x + q.u * *inv).u < 1e-9);
  }

  field::FieldQuery degenerate;
  degenerate.grad = Vec3::Zero();
  CHECK(!field::inverse_normal(degenerate).has_value());
}

TEST_CASE("grid file round trip is bit exact") {
  auto rng = oracles::rng(67);
  GridField g = random_grid(9, rng);
  g.beta = 35.5;
  g.k = 18.25;
  const auto dir = std::filesystem::temp_directory_path() / "ef_grid_test";
  std::filesystem::create_directories(dir);
  const std::string p1 = (dir / "a.udfg").string();
  const std::string p2 = (dir / "b.udfg").string();
  field::save_grid(p1, g);
  const GridField back = field::load_grid(p1);
  CHECK(back.resolution() == g.resolution());
  CHECK(back.beta == doctest::Approx(35.5));
  CHECK(back.k == doctest::Approx(18.25));
  field::save_grid(p2, back);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.size() == 4 + 4 + 4 + std::size_t(9 * 9 * 9) * 4 + 4);
  CHECK_THROWS_AS(field::load_grid((dir / "missing.udfg").string()), std::invalid_argument);
}

TEST_CASE("one exact-field shift step lands on the edge") {
  auto rng = oracles::rng(77);
  AnalyticField f(x_axis_segment());
  for (int i = 0; i < 200; ++i) {
    const Vec3 x = oracles::random_box_point(rng, 0.7);
    const auto q = f.query(x);
    if (q.u < 1e-9) continue;
    const Vec3 shifted = x - q.u * q.grad / q.grad.norm();
    CHECK(f.query(shifted).u < 1e-9);
  }
}
