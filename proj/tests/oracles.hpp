// Test-only reference implementations, kept independent of the library code
// paths they check.
#ifndef EDGEFIELD_TESTS_ORACLES_HPP
#define EDGEFIELD_TESTS_ORACLES_HPP

#include <cmath>
#include <random>

#include "edgefield/field.hpp"
#include "edgefield/geometry.hpp"
#include "edgefield/scene.hpp"

namespace oracles {

using ef::Vec3;

// Direct Bernstein-polynomial evaluation of a cubic.
inline Vec3 bernstein_eval(const ef::geom::CubicBezier& c, double s) {
  const double t = 1.0 - s;
  return t * t * t * c.p[0] + 3 * t * t * s * c.p[1] + 3 * t * s * s * c.p[2] + s * s * s * c.p[3];
}

// Brute-force nearest distance by dense uniform sampling of the parameter.
inline double dense_nearest(const ef::geom::CubicBezier& c, const Vec3& x, int samples = 100000) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const double d = (bernstein_eval(c, double(i) / samples) - x).norm();
    best = std::min(best, d);
  }
  return best;
}

// Central finite differences of a field's value.
inline Vec3 fd_gradient(const ef::field::UdfField& f, const Vec3& x, double h = 1e-5) {
  Vec3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 lo = x, hi = x;
    lo[d] -= h;
    hi[d] += h;
    g[d] = (f.query(hi).u - f.query(lo).u) / (2 * h);
  }
  return g;
}

// Polyline length of a Bezier from n chords.
inline double polyline_length(const ef::geom::CubicBezier& c, int n = 256) {
  double len = 0;
  Vec3 prev = bernstein_eval(c, 0);
  for (int i = 1; i <= n; ++i) {
    const Vec3 cur = bernstein_eval(c, double(i) / n);
    len += (cur - prev).norm();
    prev = cur;
  }
  return len;
}

// Minimum field value along a ray by dense marching.
inline double dense_min_u(const ef::field::UdfField& f, const ef::scene::Ray& r, int n = 2048) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double t = r.t_near + (r.t_far - r.t_near) * double(i) / n;
    best = std::min(best, f.query(r.origin + t * r.direction).u);
  }
  return best;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vec3 random_box_point(std::mt19937_64& g, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  return Vec3(u(g), u(g), u(g));
}

inline Vec3 random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n(0, 1);
  Vec3 v(n(g), n(g), n(g));
  while (v.norm() < 1e-6) v = Vec3(n(g), n(g), n(g));
  return v.normalized();
}

}  // namespace oracles

#endif
