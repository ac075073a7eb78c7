#include "edgefield/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ef::geom {

namespace {

Vec3 bezier_eval(const CubicBezier& c, double s) {
  // De Casteljau
  const Vec3 q0 = (1 - s) * c.p[0] + s * c.p[1];
  const Vec3 q1 = (1 - s) * c.p[1] + s * c.p[2];
  const Vec3 q2 = (1 - s) * c.p[2] + s * c.p[3];
  const Vec3 r0 = (1 - s) * q0 + s * q1;
  const Vec3 r1 = (1 - s) * q1 + s * q2;
  return (1 - s) * r0 + s * r1;
}

Vec3 bezier_derivative(const CubicBezier& c, double s) {
  const double t = 1 - s;
  return 3 * (t * t * (c.p[1] - c.p[0]) + 2 * t * s * (c.p[2] - c.p[1]) +
              s * s * (c.p[3] - c.p[2]));
}

Vec3 bezier_second_derivative(const CubicBezier& c, double s) {
  return 6 * ((1 - s) * (c.p[2] - 2 * c.p[1] + c.p[0]) +
              s * (c.p[3] - 2 * c.p[2] + c.p[1]));
}

void check_param(double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("edge parameter outside [0,1]");
}

// Chord table for arc-length parameterization of a Bezier.
constexpr int kChordSegments = 256;

struct ChordTable {
  std::array<double, kChordSegments + 1> cumulative;  // cumulative[k] = length up to s=k/256
  double total = 0.0;
};

ChordTable chord_table(const CubicBezier& c) {
  ChordTable t;
  t.cumulative[0] = 0.0;
  Vec3 prev = c.p[0];
  for (int k = 1; k <= kChordSegments; ++k) {
    const Vec3 cur = bezier_eval(c, double(k) / kChordSegments);
    t.cumulative[k] = t.cumulative[k - 1] + (cur - prev).norm();
    prev = cur;
  }
  t.total = t.cumulative[kChordSegments];
  return t;
}

// Invert arc length -> curve parameter using the chord table.
double param_at_arclength(const ChordTable& t, double a) {
  a = std::clamp(a, 0.0, t.total);
  const auto it = std::lower_bound(t.cumulative.begin(), t.cumulative.end(), a);
  int k = int(it - t.cumulative.begin());
  if (k == 0) return 0.0;
  const double seg = t.cumulative[k] - t.cumulative[k - 1];
  const double frac = seg > 0 ? (a - t.cumulative[k - 1]) / seg : 0.0;
  return (double(k - 1) + frac) / kChordSegments;
}

NearestResult nearest_on_segment(const LineSegment& seg, const Vec3& x) {
  const Vec3 d = seg.b - seg.a;
  const double len2 = d.squaredNorm();
  double s = len2 > 0 ? (x - seg.a).dot(d) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  NearestResult r;
  r.s = s;
  r.dist = (seg.a + s * d - x).norm();
  return r;
}

NearestResult nearest_on_bezier(const CubicBezier& c, const Vec3& x) {
  // Distance samples at 64 uniform seeds, then Newton refinement of
  // g(s) = d/ds ||B(s)-x||^2 started from every sampled local minimum.
  constexpr int kSeeds = 64;
  std::array<double, kSeeds> d2;
  for (int i = 0; i < kSeeds; ++i) {
    const double s = double(i) / (kSeeds - 1);
    d2[i] = (bezier_eval(c, s) - x).squaredNorm();
  }

  double best_s = 0.0;
  double best_d2 = d2[0];
  auto consider = [&](double s) {
    s = std::clamp(s, 0.0, 1.0);
    const double v = (bezier_eval(c, s) - x).squaredNorm();
    if (v < best_d2) {
      best_d2 = v;
      best_s = s;
    }
  };
  consider(1.0);

  for (int i = 0; i < kSeeds; ++i) {
    const bool local_min = (i == 0 || d2[i] <= d2[i - 1]) && (i == kSeeds - 1 || d2[i] <= d2[i + 1]);
    if (!local_min) continue;
    double s = double(i) / (kSeeds - 1);
    for (int it = 0; it < 20; ++it) {
      const Vec3 diff = bezier_eval(c, s) - x;
      const Vec3 d1 = bezier_derivative(c, s);
      const Vec3 dd = bezier_second_derivative(c, s);
      const double g = 2.0 * d1.dot(diff);
      const double gp = 2.0 * (dd.dot(diff) + d1.squaredNorm());
      if (std::abs(gp) < 1e-300) break;
      const double step = g / gp;
      s = std::clamp(s - step, 0.0, 1.0);
      if (std::abs(step) < 1e-14) break;
    }
    consider(s);
  }
  return NearestResult{best_s, std::sqrt(best_d2)};
}

}  // namespace

Vec3 eval_edge(const Edge& e, double s) {
  check_param(s);
  if (const auto* seg = std::get_if<LineSegment>(&e)) return seg->a + s * (seg->b - seg->a);
  return bezier_eval(std::get<CubicBezier>(e), s);
}

Vec3 edge_derivative(const Edge& e, double s) {
  check_param(s);
  if (const auto* seg = std::get_if<LineSegment>(&e)) return seg->b - seg->a;
  return bezier_derivative(std::get<CubicBezier>(e), s);
}

std::optional<Vec3> edge_tangent(const Edge& e, double s) {
  const Vec3 d = edge_derivative(e, s);
  const double n = d.norm();
  if (n < 1e-12) return std::nullopt;
  return Vec3(d / n);
}

NearestResult nearest_on_edge(const Edge& e, const Vec3& x) {
  if (const auto* seg = std::get_if<LineSegment>(&e)) return nearest_on_segment(*seg, x);
  return nearest_on_bezier(std::get<CubicBezier>(e), x);
}

OracleResult udf_oracle(const Vec3& x, const EdgeSet& set) {
  if (set.empty()) throw std::invalid_argument("udf_oracle: empty edge set");
  OracleResult best;
  best.u = std::numeric_limits<double>::infinity();
  for (const auto& rec : set.edges) {
    const NearestResult nr = nearest_on_edge(rec.shape, x);
    if (nr.dist < best.u) {
      best.u = nr.dist;
      best.nearest = eval_edge(rec.shape, nr.s);
      best.edge_id = rec.id;
    }
  }
  return best;
}

double edge_length(const Edge& e) {
  if (const auto* seg = std::get_if<LineSegment>(&e)) return (seg->b - seg->a).norm();
  return chord_table(std::get<CubicBezier>(e)).total;
}

std::vector<EdgeSample> sample_edge_points(const EdgeSet& set, double spacing) {
  if (!(spacing > 0)) throw std::invalid_argument("sample_edge_points: spacing must be > 0");
  std::vector<EdgeSample> out;
  for (const auto& rec : set.edges) {
    const bool is_seg = std::holds_alternative<LineSegment>(rec.shape);
    ChordTable table;
    double length;
    if (is_seg) {
      length = edge_length(rec.shape);
    } else {
      table = chord_table(std::get<CubicBezier>(rec.shape));
      length = table.total;
    }
    const int n = int(std::ceil(length / spacing)) + 1;
    for (int i = 0; i < n; ++i) {
      const double a = length * double(i) / (n - 1);
      const double s = is_seg ? (length > 0 ? a / length : 0.0) : param_at_arclength(table, a);
      EdgeSample sample;
      sample.pos = eval_edge(rec.shape, s);
      sample.edge_id = rec.id;
      auto tan = edge_tangent(rec.shape, s);
      if (!tan) tan = edge_tangent(rec.shape, std::clamp(s + (s < 0.5 ? 1e-4 : -1e-4), 0.0, 1.0));
      sample.dir = tan ? *tan : Vec3::UnitX();
      out.push_back(sample);
    }
  }
  return out;
}

std::vector<CubicBezier> circle_beziers(const Vec3& center, double radius,
                                        const Vec3& axis_u, const Vec3& axis_v) {
  constexpr double kappa = 0.5522847498307936;
  std::vector<CubicBezier> arcs;
  for (int q = 0; q < 4; ++q) {
    const double a0 = q * M_PI / 2.0;
    const double a1 = (q + 1) * M_PI / 2.0;
    const Vec3 r0 = std::cos(a0) * axis_u + std::sin(a0) * axis_v;
    const Vec3 r1 = std::cos(a1) * axis_u + std::sin(a1) * axis_v;
    const Vec3 t0 = -std::sin(a0) * axis_u + std::cos(a0) * axis_v;
    const Vec3 t1 = -std::sin(a1) * axis_u + std::cos(a1) * axis_v;
    CubicBezier c;
    c.p[0] = center + radius * r0;
    c.p[1] = center + radius * (r0 + kappa * t0);
    c.p[2] = center + radius * (r1 - kappa * t1);
    c.p[3] = center + radius * r1;
    arcs.push_back(c);
  }
  return arcs;
}

// ---------------------------------------------------------------------------
// IO

EdgeSet read_edge_set(std::istream& in) {
  EdgeSet set;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    EdgeRecord rec;
    if (!(ss >> rec.id)) throw std::invalid_argument("edge set line " + std::to_string(lineno) + ": missing id");
    auto read_vec = [&](Vec3& v) {
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw std::invalid_argument("edge set line " + std::to_string(lineno) + ": bad coordinates");
    };
    if (kind == "L") {
      LineSegment seg;
      read_vec(seg.a);
      read_vec(seg.b);
      rec.shape = seg;
    } else if (kind == "B") {
      CubicBezier c;
      for (auto& p : c.p) read_vec(p);
      rec.shape = c;
    } else {
      throw std::invalid_argument("edge set line " + std::to_string(lineno) + ": unknown record '" + kind + "'");
    }
    set.edges.push_back(rec);
  }
  return set;
}

EdgeSet load_edge_set(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open edge set file: " + path);
  return read_edge_set(f);
}

void write_edge_set(std::ostream& out, const EdgeSet& set) {
  out.precision(17);
  for (const auto& rec : set.edges) {
    if (const auto* seg = std::get_if<LineSegment>(&rec.shape)) {
      out << "L " << rec.id;
      for (const Vec3* v : {&seg->a, &seg->b}) out << ' ' << v->x() << ' ' << v->y() << ' ' << v->z();
      out << '\n';
    } else {
      const auto& c = std::get<CubicBezier>(rec.shape);
      out << "B " << rec.id;
      for (const auto& p : c.p) out << ' ' << p.x() << ' ' << p.y() << ' ' << p.z();
      out << '\n';
    }
  }
}

void save_edge_set(const std::string& path, const EdgeSet& set) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write edge set file: " + path);
  write_edge_set(f, set);
}

void save_edge_set_obj(const std::string& path, const EdgeSet& set, double spacing) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write OBJ file: " + path);
  f.precision(10);
  std::size_t base = 1;
  for (const auto& rec : set.edges) {
    EdgeSet one;
    one.edges.push_back(rec);
    const auto samples = sample_edge_points(one, spacing);
    for (const auto& s : samples) f << "v " << s.pos.x() << ' ' << s.pos.y() << ' ' << s.pos.z() << '\n';
    f << "l";
    for (std::size_t i = 0; i < samples.size(); ++i) f << ' ' << base + i;
    f << '\n';
    base += samples.size();
  }
}

}  // namespace ef::geom
