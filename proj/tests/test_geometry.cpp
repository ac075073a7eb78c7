#include "edgefield/geometry.hpp"

#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

using namespace ef;
using geom::CubicBezier;
using geom::Edge;
using geom::EdgeSet;
using geom::LineSegment;

namespace {

CubicBezier random_bezier(std::mt19937_64& rng) {
  CubicBezier c;
  for (auto& p : c.p) p = oracles::random_box_point(rng, 0.8);
  return c;
}

EdgeSet single(const Edge& e) {
  EdgeSet s;
  s.edges.push_back({0, e});
  return s;
}

}  // namespace

TEST_CASE("eval_edge basics") {
  const Edge seg = LineSegment{Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  CHECK(geom::eval_edge(seg, 0.5).isApprox(Vec3(0, 0, 0)));

  CubicBezier constant;
  for (auto& p : constant.p) p = Vec3(0.2, 0, 0);
  CHECK(geom::eval_edge(Edge(constant), 0.7).isApprox(Vec3(0.2, 0, 0)));

  CubicBezier line;
  line.p[0] = Vec3(0, 0, 0);
  line.p[1] = Vec3(1, 0, 0);
  line.p[2] = Vec3(2, 0, 0);
  line.p[3] = Vec3(3, 0, 0);
  CHECK(geom::eval_edge(Edge(line), 0.5).isApprox(oracles::bernstein_eval(line, 0.5), 1e-12));
  CHECK(geom::eval_edge(Edge(line), 0.5).isApprox(Vec3(1.5, 0, 0), 1e-12));

  CHECK_THROWS_AS(geom::eval_edge(seg, 1.5), std::invalid_argument);
}

TEST_CASE("De Casteljau equals Bernstein evaluation") {
  auto rng = oracles::rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const CubicBezier c = random_bezier(rng);
    const double s = uni(rng);
    CHECK((geom::eval_edge(Edge(c), s) - oracles::bernstein_eval(c, s)).norm() < 1e-12);
  }
}

TEST_CASE("edge_tangent") {
  const Edge seg = LineSegment{Vec3(0, 0, 0), Vec3(0, 2, 0)};
  for (double s : {0.0, 0.3, 1.0}) CHECK(geom::edge_tangent(seg, s)->isApprox(Vec3(0, 1, 0)));

  CubicBezier collinear;
  collinear.p[0] = Vec3(0, 0, 0);
  collinear.p[1] = Vec3(0.1, 0, 0);
  collinear.p[2] = Vec3(0.2, 0, 0);
  collinear.p[3] = Vec3(0.3, 0, 0);
  CHECK(geom::edge_tangent(Edge(collinear), 0.0)->isApprox(Vec3(1, 0, 0)));

  // quarter circle: tangent at the start is perpendicular to the radius
  const auto arcs = geom::circle_beziers(Vec3::Zero(), 0.5, Vec3::UnitX(), Vec3::UnitY());
  const auto tan = geom::edge_tangent(Edge(arcs[0]), 0.0);
  REQUIRE(tan.has_value());
  CHECK(std::abs(tan->dot(Vec3::UnitX())) < 1e-6);  // radius at the start point
  // finite-difference tangent oracle
  const Vec3 fd = (oracles::bernstein_eval(arcs[0], 1e-7) - oracles::bernstein_eval(arcs[0], 0.0)).normalized();
  CHECK((*tan - fd).norm() < 1e-6);

  CubicBezier degenerate;
  for (auto& p : degenerate.p) p = Vec3(0.2, 0, 0);
  CHECK(!geom::edge_tangent(Edge(degenerate), 0.5).has_value());
}

TEST_CASE("nearest_on_edge for segments") {
  const Edge seg = LineSegment{Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  auto r = geom::nearest_on_edge(seg, Vec3(0, 1, 0));
  CHECK(r.s == doctest::Approx(0.5));
  CHECK(r.dist == doctest::Approx(1.0));
  r = geom::nearest_on_edge(seg, Vec3(2, 0, 0));
  CHECK(r.s == doctest::Approx(1.0));
  CHECK(r.dist == doctest::Approx(1.0));
}

TEST_CASE("nearest_on_edge matches the dense-sampling oracle") {
  auto rng = oracles::rng(22);
  for (int i = 0; i < 1000; ++i) {
    const CubicBezier c = random_bezier(rng);
    const Vec3 x = oracles::random_box_point(rng, 1.5);
    const double fast = geom::nearest_on_edge(Edge(c), x).dist;
    const double dense = oracles::dense_nearest(c, x, 100000);
    CHECK(std::abs(fast - dense) < 1e-6);
    CHECK(fast <= dense + 1e-12);
  }
}

TEST_CASE("udf_oracle") {
  EdgeSet set;
  set.edges.push_back({0, LineSegment{Vec3(-1, 0, 0), Vec3(1, 0, 0)}});
  set.edges.push_back({1, LineSegment{Vec3(-1, 1, 0), Vec3(1, 1, 0)}});

  SUBCASE("zero on an edge") {
    const auto r = geom::udf_oracle(Vec3(0.25, 0, 0), set);
    CHECK(r.u < 1e-9);
    CHECK(r.edge_id == 0);
  }
  SUBCASE("tie goes to the lower id") {
    const auto r = geom::udf_oracle(Vec3(0, 0.5, 0), set);
    CHECK(r.u == doctest::Approx(0.5));
    CHECK(r.edge_id == 0);
  }
  SUBCASE("empty set rejected") {
    CHECK_THROWS_AS(geom::udf_oracle(Vec3::Zero(), EdgeSet{}), std::invalid_argument);
  }
  SUBCASE("matches per-edge dense sampling") {
    auto rng = oracles::rng(33);
    EdgeSet mixed;
    mixed.edges.push_back({0, LineSegment{Vec3(-0.5, -0.5, 0), Vec3(0.5, 0.5, 0.2)}});
    mixed.edges.push_back({1, Edge(random_bezier(rng))});
    mixed.edges.push_back({2, Edge(random_bezier(rng))});
    for (int i = 0; i < 50; ++i) {
      const Vec3 x = oracles::random_box_point(rng);
      double expected = std::numeric_limits<double>::infinity();
      for (const auto& rec : mixed.edges) {
        if (const auto* s = std::get_if<LineSegment>(&rec.shape))
          expected = std::min(expected, geom::nearest_on_edge(rec.shape, x).dist);
        else
          expected = std::min(expected, oracles::dense_nearest(std::get<CubicBezier>(rec.shape), x));
      }
      CHECK(geom::udf_oracle(x, mixed).u == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("udf_oracle is 1-Lipschitz") {
  auto rng = oracles::rng(44);
  EdgeSet set;
  set.edges.push_back({0, Edge(random_bezier(rng))});
  set.edges.push_back({1, LineSegment{Vec3(-0.6, 0.2, -0.3), Vec3(0.4, -0.5, 0.6)}});
  for (int i = 0; i < 500; ++i) {
    const Vec3 x = oracles::random_box_point(rng);
    const Vec3 y = oracles::random_box_point(rng);
    const double du = std::abs(geom::udf_oracle(x, set).u - geom::udf_oracle(y, set).u);
    CHECK(du <= (x - y).norm() + 1e-9);
  }
}

TEST_CASE("udf_oracle is zero exactly on edges") {
  auto rng = oracles::rng(55);
  EdgeSet set;
  set.edges.push_back({0, Edge(random_bezier(rng))});
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 on = geom::eval_edge(set.edges[0].shape, uni(rng));
    CHECK(geom::udf_oracle(on, set).u < 1e-9);
  }
}

TEST_CASE("sample_edge_points") {
  SUBCASE("segment counts") {
    EdgeSet set = single(LineSegment{Vec3(0, 0, 0), Vec3(1, 0, 0)});
    CHECK(geom::sample_edge_points(set, 0.25).size() == 5);
    CHECK(geom::sample_edge_points(set, 2.0).size() == 2);
    const auto pts = geom::sample_edge_points(set, 0.25);
    CHECK(pts.front().pos.isApprox(Vec3(0, 0, 0)));
    CHECK(pts.back().pos.isApprox(Vec3(1, 0, 0)));
  }
  SUBCASE("arc length spacing against the polyline oracle") {
    const auto arcs = geom::circle_beziers(Vec3::Zero(), 0.5, Vec3::UnitX(), Vec3::UnitY());
    EdgeSet set = single(Edge(arcs[0]));
    const auto pts = geom::sample_edge_points(set, 0.01);
    double total = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i].pos - pts[i - 1].pos).norm();
    CHECK(total == doctest::Approx(oracles::polyline_length(arcs[0])).epsilon(0.01));
    // gaps are near-uniform in arc length
    double lo = 1e30, hi = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double g = (pts[i].pos - pts[i - 1].pos).norm();
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
    CHECK(hi / lo < 1.1);
  }
}

TEST_CASE("circle approximation error stays below metric thresholds") {
  // dense radial sweep of the 4-arc construction
  const double radius = 0.4;
  const auto arcs = geom::circle_beziers(Vec3::Zero(), radius, Vec3::UnitX(), Vec3::UnitY());
  double worst = 0;
  for (const auto& arc : arcs)
    for (int i = 0; i <= 2000; ++i) {
      const Vec3 p = oracles::bernstein_eval(arc, i / 2000.0);
      worst = std::max(worst, std::abs(p.norm() - radius));
    }
  CHECK(worst < 3e-4 * radius);
}

TEST_CASE("edge set text round trip") {
  auto rng = oracles::rng(66);
  EdgeSet set;
  set.edges.push_back({0, LineSegment{oracles::random_box_point(rng), oracles::random_box_point(rng)}});
  set.edges.push_back({3, Edge(random_bezier(rng))});
  std::stringstream ss;
  geom::write_edge_set(ss, set);
  ss << "# trailing comment\n";
  const EdgeSet back = geom::read_edge_set(ss);
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(back.edges[i].id == set.edges[i].id);
    EdgeSet a = single(set.edges[i].shape), b = single(back.edges[i].shape);
    for (double s : {0.0, 0.25, 0.7, 1.0})
      CHECK((geom::eval_edge(a.edges[0].shape, s) - geom::eval_edge(b.edges[0].shape, s)).norm() ==
            0.0);
  }
  std::stringstream bad("Q 0 1 2 3");
  CHECK_THROWS_AS(geom::read_edge_set(bad), std::invalid_argument);
}
