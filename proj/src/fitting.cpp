#include "edgefield/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ef::fit {

namespace {

double point_line_distance(const Vec3& p, const Vec3& origin, const Vec3& dir_unit) {
  return ((p - origin) - (p - origin).dot(dir_unit) * dir_unit).norm();
}

geom::LineSegment pca_segment(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= double(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 axis = eig.eigenvectors().col(2).normalized();  // largest eigenvalue
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double s = (p - mean).dot(axis);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return geom::LineSegment{mean + lo * axis, mean + hi * axis};
}

Vec3 segment_dir(const geom::LineSegment& s) { return (s.b - s.a).normalized(); }

double segment_segment_distance(const geom::LineSegment& s1, const geom::LineSegment& s2) {
  // standard clamped closest-approach between two segments
  const Vec3 d1 = s1.b - s1.a;
  const Vec3 d2 = s2.b - s2.a;
  const Vec3 r = s1.a - s2.a;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s, t;
  if (a <= 1e-30 && e <= 1e-30) return r.norm();
  if (a <= 1e-30) {
    s = 0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 1e-30) {
      t = 0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 1e-30 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return (s1.a + s * d1 - (s2.a + t * d2)).norm();
}

// Least-squares cubic through ordered points, first/last pinned as the outer
// control points, chord-length parameterization.
geom::CubicBezier lsq_bezier(const std::vector<Vec3>& pts) {
  const std::size_t n = pts.size();
  geom::CubicBezier c;
  c.p[0] = pts.front();
  c.p[3] = pts.back();

  std::vector<double> t(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    total += (pts[i] - pts[i - 1]).norm();
    t[i] = total;
  }
  if (total <= 0) {
    c.p[1] = c.p[0];
    c.p[2] = c.p[3];
    return c;
  }
  for (auto& v : t) v /= total;

  double a11 = 0, a12 = 0, a22 = 0;
  Vec3 r1 = Vec3::Zero(), r2 = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = t[i];
    const double b0 = (1 - s) * (1 - s) * (1 - s);
    const double b1 = 3 * (1 - s) * (1 - s) * s;
    const double b2 = 3 * (1 - s) * s * s;
    const double b3 = s * s * s;
    const Vec3 rhs = pts[i] - b0 * c.p[0] - b3 * c.p[3];
    a11 += b1 * b1;
    a12 += b1 * b2;
    a22 += b2 * b2;
    r1 += b1 * rhs;
    r2 += b2 * rhs;
  }
  const double det = a11 * a22 - a12 * a12;
  if (std::abs(det) < 1e-12) {
    c.p[1] = c.p[0] + (c.p[3] - c.p[0]) / 3.0;
    c.p[2] = c.p[0] + 2.0 * (c.p[3] - c.p[0]) / 3.0;
    return c;
  }
  c.p[1] = (a22 * r1 - a12 * r2) / det;
  c.p[2] = (a11 * r2 - a12 * r1) / det;
  return c;
}

std::optional<RansacLine> ransac_line_on(const std::vector<Vec3>& pts,
                                         const std::vector<int>& index_map, const FitConfig& cfg,
                                         std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  if (n < std::size_t(cfg.min_line_inliers)) return std::nullopt;
  const double tol = cfg.tol();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<int> best_inliers;
  for (int it = 0; it < cfg.ransac_iters; ++it) {
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    if (i == j) continue;
    const Vec3 dir = pts[j] - pts[i];
    const double len = dir.norm();
    if (len < 1e-12) continue;
    const Vec3 d = dir / len;
    std::vector<int> inliers;
    for (std::size_t p = 0; p < n; ++p)
      if (point_line_distance(pts[p], pts[i], d) <= tol) inliers.push_back(int(p));
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }
  if (best_inliers.size() < std::size_t(cfg.min_line_inliers)) return std::nullopt;

  std::vector<Vec3> inlier_pts;
  inlier_pts.reserve(best_inliers.size());
  for (int p : best_inliers) inlier_pts.push_back(pts[p]);
  RansacLine out;
  out.segment = pca_segment(inlier_pts);
  out.inliers.reserve(best_inliers.size());
  for (int p : best_inliers) out.inliers.push_back(index_map[p]);
  return out;
}

}  // namespace

std::optional<RansacLine> ransac_line(const extract::Polyline& poly, const FitConfig& cfg,
                                      std::mt19937_64& rng) {
  std::vector<Vec3> pts;
  pts.reserve(poly.points.size());
  for (const auto& p : poly.points) pts.push_back(p.pos);
  std::vector<int> index_map(pts.size());
  std::iota(index_map.begin(), index_map.end(), 0);
  return ransac_line_on(pts, index_map, cfg, rng);
}

std::vector<FittedEdge> fit_polyline(const extract::Polyline& poly, const FitConfig& cfg,
                                     std::mt19937_64& rng, bool allow_bezier) {
  std::vector<FittedEdge> out;
  std::vector<int> active(poly.points.size());
  std::iota(active.begin(), active.end(), 0);

  // extract lines while a strong enough one exists
  while (active.size() >= std::size_t(cfg.min_line_inliers)) {
    std::vector<Vec3> pts;
    pts.reserve(active.size());
    for (int i : active) pts.push_back(poly.points[i].pos);
    const auto line = ransac_line_on(pts, active, cfg, rng);
    if (!line) break;
    FittedEdge e;
    e.shape = line->segment;
    for (int i : line->inliers) e.support.push_back(poly.points[i].pos);
    out.push_back(std::move(e));
    std::vector<char> used(poly.points.size(), 0);
    for (int i : line->inliers) used[i] = 1;
    std::vector<int> rest;
    rest.reserve(active.size() - line->inliers.size());
    for (int i : active)
      if (!used[i]) rest.push_back(i);
    active = std::move(rest);
  }

  if (!allow_bezier) return out;

  // leftover contiguous runs become Bezier curves
  std::size_t start = 0;
  while (start < active.size()) {
    std::size_t end = start + 1;
    while (end < active.size() && active[end] == active[end - 1] + 1) ++end;
    if (end - start >= std::size_t(cfg.min_bezier_points)) {
      std::vector<Vec3> run;
      run.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) run.push_back(poly.points[active[i]].pos);
      FittedEdge e;
      e.shape = lsq_bezier(run);
      e.support = std::move(run);
      out.push_back(std::move(e));
    }
    start = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Merging

namespace {

struct NearestPair {
  double dist;
  double s_a, s_b;  // parameters of the closest points
};

NearestPair curve_nearest_pair(const geom::Edge& a, const geom::Edge& b) {
  // 64x64 mutual sampling, then alternating nearest-point refinement
  constexpr int kGrid = 64;
  NearestPair best{std::numeric_limits<double>::infinity(), 0, 0};
  std::vector<Vec3> pa(kGrid + 1), pb(kGrid + 1);
  for (int i = 0; i <= kGrid; ++i) {
    pa[i] = geom::eval_edge(a, double(i) / kGrid);
    pb[i] = geom::eval_edge(b, double(i) / kGrid);
  }
  for (int i = 0; i <= kGrid; ++i)
    for (int j = 0; j <= kGrid; ++j) {
      const double d = (pa[i] - pb[j]).norm();
      if (d < best.dist) best = {d, double(i) / kGrid, double(j) / kGrid};
    }
  for (int round = 0; round < 5; ++round) {
    const auto nb = geom::nearest_on_edge(b, geom::eval_edge(a, best.s_a));
    best.s_b = nb.s;
    const auto na = geom::nearest_on_edge(a, geom::eval_edge(b, best.s_b));
    best.s_a = na.s;
    best.dist = na.dist;
  }
  return best;
}

std::vector<Vec3> sample_curve(const geom::Edge& e, bool reversed, int count) {
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double s = double(i) / (count - 1);
    out.push_back(geom::eval_edge(e, reversed ? 1.0 - s : s));
  }
  return out;
}

std::optional<FittedEdge> try_merge(const FittedEdge& ea, const FittedEdge& eb,
                                    const FitConfig& cfg) {
  const bool a_line = std::holds_alternative<geom::LineSegment>(ea.shape);
  const bool b_line = std::holds_alternative<geom::LineSegment>(eb.shape);
  if (a_line != b_line) return std::nullopt;

  if (a_line) {
    const auto& sa = std::get<geom::LineSegment>(ea.shape);
    const auto& sb = std::get<geom::LineSegment>(eb.shape);
    if (segment_segment_distance(sa, sb) > cfg.ds()) return std::nullopt;
    if (std::abs(segment_dir(sa).dot(segment_dir(sb))) < cfg.s_c) return std::nullopt;
    std::vector<Vec3> pts;
    auto add = [&](const FittedEdge& e, const geom::LineSegment& s) {
      if (e.support.empty()) {
        pts.push_back(s.a);
        pts.push_back(s.b);
      } else {
        pts.insert(pts.end(), e.support.begin(), e.support.end());
      }
    };
    add(ea, sa);
    add(eb, sb);
    FittedEdge merged;
    merged.shape = pca_segment(pts);
    merged.support = std::move(pts);
    return merged;
  }

  const auto pair = curve_nearest_pair(ea.shape, eb.shape);
  if (pair.dist > cfg.ds()) return std::nullopt;
  const auto ta = geom::edge_tangent(ea.shape, pair.s_a);
  const auto tb = geom::edge_tangent(eb.shape, pair.s_b);
  if (!ta || !tb) return std::nullopt;
  if (std::abs(ta->dot(*tb)) < cfg.s_c) return std::nullopt;

  // orient so the junction gap between the two sample runs is smallest
  const Vec3 a0 = geom::eval_edge(ea.shape, 0.0), a1 = geom::eval_edge(ea.shape, 1.0);
  const Vec3 b0 = geom::eval_edge(eb.shape, 0.0), b1 = geom::eval_edge(eb.shape, 1.0);
  const double gaps[4] = {(a1 - b0).norm(), (a1 - b1).norm(), (a0 - b0).norm(), (a0 - b1).norm()};
  const int which = int(std::min_element(gaps, gaps + 4) - gaps);
  const bool rev_a = which >= 2;
  const bool rev_b = which == 1 || which == 3;

  std::vector<Vec3> pts = sample_curve(ea.shape, rev_a, 33);
  const auto tail = sample_curve(eb.shape, rev_b, 33);
  pts.insert(pts.end(), tail.begin(), tail.end());
  FittedEdge merged;
  merged.shape = lsq_bezier(pts);
  merged.support = ea.support;
  merged.support.insert(merged.support.end(), eb.support.begin(), eb.support.end());
  return merged;
}

}  // namespace

std::vector<FittedEdge> merge_edges(std::vector<FittedEdge> edges, const FitConfig& cfg) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < edges.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < edges.size() && !changed; ++j) {
        if (auto merged = try_merge(edges[i], edges[j], cfg)) {
          edges[i] = std::move(*merged);
          edges.erase(edges.begin() + j);
          changed = true;
        }
      }
    }
  }
  return edges;
}

geom::EdgeSet merge_endpoints(const std::vector<FittedEdge>& edges, const FitConfig& cfg) {
  struct EndpointRef {
    int edge;
    int which;  // 0 = start, 1 = end
    Vec3 pos;
  };
  std::vector<EndpointRef> eps;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (const auto* seg = std::get_if<geom::LineSegment>(&edges[i].shape)) {
      eps.push_back({int(i), 0, seg->a});
      eps.push_back({int(i), 1, seg->b});
    } else {
      const auto& c = std::get<geom::CubicBezier>(edges[i].shape);
      eps.push_back({int(i), 0, c.p[0]});
      eps.push_back({int(i), 1, c.p[3]});
    }
  }

  // single linkage union-find at distance d_e
  std::vector<int> parent(eps.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  const double de = cfg.de();
  for (std::size_t i = 0; i < eps.size(); ++i)
    for (std::size_t j = i + 1; j < eps.size(); ++j)
      if ((eps[i].pos - eps[j].pos).norm() <= de) parent[find(int(j))] = find(int(i));

  std::vector<Vec3> centroid(eps.size(), Vec3::Zero());
  std::vector<int> count(eps.size(), 0);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const int root = find(int(i));
    centroid[root] += eps[i].pos;
    count[root] += 1;
  }

  geom::EdgeSet out;
  std::vector<geom::Edge> shapes;
  shapes.reserve(edges.size());
  for (const auto& e : edges) shapes.push_back(e.shape);
  for (const auto& ref : eps) {
    const int root = find(int(&ref - eps.data()));
    const Vec3 target = centroid[root] / double(count[root]);
    auto& shape = shapes[ref.edge];
    if (auto* seg = std::get_if<geom::LineSegment>(&shape)) {
      (ref.which == 0 ? seg->a : seg->b) = target;
    } else {
      auto& c = std::get<geom::CubicBezier>(shape);
      if (ref.which == 0) {
        const Vec3 offset = target - c.p[0];
        c.p[0] = target;
        c.p[1] += offset;
      } else {
        const Vec3 offset = target - c.p[3];
        c.p[3] = target;
        c.p[2] += offset;
      }
    }
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) out.edges.push_back({int(i), shapes[i]});
  return out;
}

geom::EdgeSet refine_edges(const geom::EdgeSet& edges, const std::vector<scene::View>& views,
                           const FitConfig& cfg) {
  if (views.empty()) throw std::invalid_argument("refine_edges: no views");
  geom::EdgeSet out;
  for (const auto& rec : edges.edges) {
    geom::EdgeSet one;
    one.edges.push_back(rec);
    const double len = geom::edge_length(rec.shape);
    const double spacing = std::max(len / 15.0, 1e-6);
    const auto samples = geom::sample_edge_points(one, spacing);

    int supported_views = 0;
    for (const auto& view : views) {
      int in_frame = 0, supported = 0;
      for (const auto& s : samples) {
        const auto proj = scene::project(view.camera, s.pos);
        if (!proj.in_front || proj.px < 0 || proj.px >= view.camera.width || proj.py < 0 ||
            proj.py >= view.camera.height)
          continue;
        ++in_frame;
        // any edge-probability pixel within 2 px of the projection counts
        bool hit = false;
        const int cx = int(std::floor(proj.px));
        const int cy = int(std::floor(proj.py));
        for (int dy = -2; dy <= 2 && !hit; ++dy)
          for (int dx = -2; dx <= 2 && !hit; ++dx) {
            const int x = cx + dx, y = cy + dy;
            if (x < 0 || x >= view.edge_map.width || y < 0 || y >= view.edge_map.height) continue;
            if (view.edge_map.at(x, y) < cfg.refine_support_prob) continue;
            const double ddx = x + 0.5 - proj.px, ddy = y + 0.5 - proj.py;
            hit = ddx * ddx + ddy * ddy <= 4.0;
          }
        if (hit) ++supported;
      }
      if (in_frame * 2 >= int(samples.size()) && supported * 2 >= in_frame && in_frame > 0)
        ++supported_views;
    }
    if (double(supported_views) / double(views.size()) >= cfg.refine_visible_frac)
      out.edges.push_back(rec);
  }
  return out;
}

}  // namespace ef::fit
