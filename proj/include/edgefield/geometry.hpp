#ifndef EDGEFIELD_GEOMETRY_HPP
#define EDGEFIELD_GEOMETRY_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edgefield/core.hpp"

namespace ef::geom {

struct LineSegment {
  Vec3 a{Vec3::Zero()};
  Vec3 b{Vec3::Zero()};
};

/// Cubic Bezier curve given by four control points.
struct CubicBezier {
  Vec3 p[4];
};

using Edge = std::variant<LineSegment, CubicBezier>;

struct EdgeRecord {
  int id = 0;
  Edge shape;
};

/// Ordered collection of parametric edges with unique ids. Used as ground
/// truth, as the source of the analytic distance field, and as pipeline output.
struct EdgeSet {
  std::vector<EdgeRecord> edges;

  bool empty() const { return edges.empty(); }
  std::size_t size() const { return edges.size(); }
};

// ---------------------------------------------------------------------------
// Evaluation

Vec3 eval_edge(const Edge& e, double s);
Vec3 edge_derivative(const Edge& e, double s);

/// Normalized first derivative. Empty when the derivative is degenerate
/// (coincident control points produce a cusp with no stable tangent).
std::optional<Vec3> edge_tangent(const Edge& e, double s);

struct NearestResult {
  double s = 0.0;     // parameter of the closest point
  double dist = 0.0;  // Euclidean distance
};

/// Closest point on an edge. Segments use projection + clamp; Beziers seed
/// Newton iterations on d/ds ||B(s)-x||^2 from 64 uniform samples.
NearestResult nearest_on_edge(const Edge& e, const Vec3& x);

struct OracleResult {
  double u = 0.0;
  Vec3 nearest{Vec3::Zero()};
  int edge_id = -1;
};

/// Exact unsigned distance to the nearest edge of the set.
/// Ties are broken toward the lowest edge id. Throws on an empty set.
OracleResult udf_oracle(const Vec3& x, const EdgeSet& set);

double edge_length(const Edge& e);  // Beziers via 256-segment chord table

struct EdgeSample {
  Vec3 pos{Vec3::Zero()};
  Vec3 dir{Vec3::UnitX()};  // unit tangent at the sample
  int edge_id = -1;
};

/// Arc-length-uniform samples per edge: ceil(length/spacing)+1 points
/// including both endpoints.
std::vector<EdgeSample> sample_edge_points(const EdgeSet& set, double spacing);

// ---------------------------------------------------------------------------
// Constructions

/// Circle as four cubic Bezier arcs (kappa = 0.5523). axis_u/axis_v span the
/// circle plane and must be orthonormal.
std::vector<CubicBezier> circle_beziers(const Vec3& center, double radius,
                                        const Vec3& axis_u, const Vec3& axis_v);

// ---------------------------------------------------------------------------
// Text format: one record per line,
//   L id ax ay az bx by bz
//   B id x0 y0 z0 x1 y1 z1 x2 y2 z2 x3 y3 z3
// '#' starts a comment.

EdgeSet read_edge_set(std::istream& in);
EdgeSet load_edge_set(const std::string& path);
void write_edge_set(std::ostream& out, const EdgeSet& set);
void save_edge_set(const std::string& path, const EdgeSet& set);

/// OBJ polyline export for external viewers; edges sampled at fixed spacing.
void save_edge_set_obj(const std::string& path, const EdgeSet& set, double spacing);

}  // namespace ef::geom

#endif
