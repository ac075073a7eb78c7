#include "edgefield/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace ef::extract {

std::vector<Vec3> init_points(const field::UdfField& f, const ExtractConfig& cfg) {
  const int m = cfg.grid_m;
  const double cell = 2.0 / m;
  const std::size_t total = std::size_t(m) * m * m;
  std::vector<char> keep(total, 0);
  parallel_for(total, [&](std::size_t i) {
    const int ix = int(i % m);
    const int iy = int((i / m) % m);
    const int iz = int(i / (std::size_t(m) * m));
    const Vec3 center(-1 + (ix + 0.5) * cell, -1 + (iy + 0.5) * cell, -1 + (iz + 0.5) * cell);
    keep[i] = f.query(center).u <= cfg.eps_init;
  });
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < total; ++i) {
    if (!keep[i]) continue;
    const int ix = int(i % m);
    const int iy = int((i / m) % m);
    const int iz = int(i / (std::size_t(m) * m));
    out.emplace_back(-1 + (ix + 0.5) * cell, -1 + (iy + 0.5) * cell, -1 + (iz + 0.5) * cell);
  }
  return out;
}

std::vector<Vec3> shift_points(std::vector<Vec3> points, const field::UdfField& f,
                               int iterations, std::size_t* dropped) {
  std::vector<char> alive(points.size(), 1);
  parallel_for(points.size(), [&](std::size_t i) {
    Vec3 x = points[i];
    for (int it = 0; it < iterations; ++it) {
      const field::FieldQuery q = f.query(x);
      const double gn = q.grad.norm();
      if (gn <= 1e-8) {
        alive[i] = 0;
        return;
      }
      x -= q.u / gn * q.grad;
    }
    points[i] = x;
  });
  std::size_t lost = 0;
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (alive[i])
      out.push_back(points[i]);
    else
      ++lost;
  }
  if (dropped) *dropped = lost;
  return out;
}

namespace {

// exact 21-bit packing per axis; coordinates live well inside [-4, 4]
std::int64_t pack_cell(std::int64_t x, std::int64_t y, std::int64_t z) {
  return (x << 42) | (y << 21) | z;
}

std::int64_t voxel_key(const Vec3& p, double voxel) {
  const auto q = [&](double v) { return std::int64_t(std::floor((v + 4.0) / voxel)); };
  return pack_cell(q(p.x()), q(p.y()), q(p.z()));
}

}  // namespace

std::vector<Vec3> dedupe_points(const std::vector<Vec3>& points, const field::UdfField& f,
                                double voxel) {
  std::vector<double> u(points.size());
  parallel_for(points.size(), [&](std::size_t i) { u[i] = f.query(points[i]).u; });
  std::unordered_map<std::int64_t, std::size_t> best;
  best.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto key = voxel_key(points[i], voxel);
    const auto [it, inserted] = best.try_emplace(key, i);
    if (!inserted && u[i] < u[it->second]) it->second = i;
  }
  std::vector<std::size_t> picked;
  picked.reserve(best.size());
  for (const auto& [key, idx] : best) picked.push_back(idx);
  std::sort(picked.begin(), picked.end());  // scan order, independent of hash iteration
  std::vector<Vec3> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) out.push_back(points[i]);
  return out;
}

std::optional<OrientedEdgePoint> edge_direction(const Vec3& x, const field::UdfField& f,
                                                const ExtractConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-cfg.delta_range, cfg.delta_range);
  std::vector<Vec3> normals;
  normals.reserve(cfg.direction_probes);
  for (int i = 0; i < cfg.direction_probes; ++i) {
    const Vec3 probe = x + Vec3(uni(rng), uni(rng), uni(rng));
    if (auto n = field::inverse_normal(f, probe)) normals.push_back(*n);
  }
  if (normals.size() < 3) return std::nullopt;

  Mat3 ata = Mat3::Zero();
  for (const auto& n : normals) ata += n * n.transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(ata);
  if (eig.info() != Eigen::Success) return std::nullopt;
  // eigenvalues ascending; singular values of the stacked normal matrix are
  // their square roots
  const double s3 = std::sqrt(std::max(eig.eigenvalues()[0], 0.0));
  const double s2 = std::sqrt(std::max(eig.eigenvalues()[1], 0.0));
  const double s1 = std::sqrt(std::max(eig.eigenvalues()[2], 0.0));
  OrientedEdgePoint p;
  p.pos = x;
  p.dir = eig.eigenvectors().col(0).normalized();
  p.stability = s1 > 0 ? (s2 - s3) / s1 : 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// Point connection

namespace {

struct IndexedSet {
  std::vector<int> items;
  std::vector<int> slot;  // slot[i] = position in items, -1 when removed

  explicit IndexedSet(int n) : items(n), slot(n) {
    for (int i = 0; i < n; ++i) items[i] = slot[i] = i;
  }
  bool contains(int i) const { return slot[i] >= 0; }
  std::size_t size() const { return items.size(); }
  void remove(int i) {
    const int pos = slot[i];
    const int last = items.back();
    items[pos] = last;
    slot[last] = pos;
    items.pop_back();
    slot[i] = -1;
  }
};

struct HashGrid {
  double cell;
  std::unordered_map<std::int64_t, std::vector<int>> cells;

  static std::int64_t key(int x, int y, int z) { return pack_cell(x, y, z); }
  int coord(double v) const { return int(std::floor((v + 4.0) / cell)); }

  HashGrid(const std::vector<OrientedEdgePoint>& pts, double cell_size) : cell(cell_size) {
    for (std::size_t i = 0; i < pts.size(); ++i)
      cells[key(coord(pts[i].pos.x()), coord(pts[i].pos.y()), coord(pts[i].pos.z()))].push_back(
          int(i));
  }

  template <typename Fn>
  void for_neighbors(const Vec3& p, Fn&& fn) const {
    const int cx = coord(p.x()), cy = coord(p.y()), cz = coord(p.z());
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells.find(key(cx + dx, cy + dy, cz + dz));
          if (it == cells.end()) continue;
          for (int i : it->second) fn(i);
        }
  }
};

}  // namespace

std::vector<Polyline> connect_points(const std::vector<OrientedEdgePoint>& pts,
                                     const ExtractConfig& cfg, std::mt19937_64& rng,
                                     ConnectStats* stats) {
  if (pts.empty()) throw std::invalid_argument("connect_points: empty input");
  const double dt = cfg.dt();
  const HashGrid grid(pts, dt);
  IndexedSet unvisited(int(pts.size()));
  ConnectStats st;
  st.input = pts.size();
  std::vector<Polyline> polylines;

  struct Candidate {
    int index;
    double similarity;
  };
  std::vector<Candidate> cands;

  // One growth step from `tip` along `dir`; returns the chosen point or -1.
  auto grow_step = [&](int tip, const Vec3& dir) {
    cands.clear();
    grid.for_neighbors(pts[tip].pos, [&](int j) {
      if (!unvisited.contains(j)) return;
      const Vec3 d = pts[j].pos - pts[tip].pos;
      const double dist = d.norm();
      if (dist > dt || dist <= 0) return;
      cands.push_back({j, d.dot(dir) / dist});
    });
    if (cands.empty()) return -1;
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.similarity != b.similarity ? a.similarity > b.similarity : a.index < b.index;
    });
    const Candidate best = cands.front();
    if (!(best.similarity > cfg.s_t)) return -1;
    unvisited.remove(best.index);
    for (std::size_t c = 1; c < cands.size(); ++c) {
      if (cands[c].similarity > cfg.n_r * best.similarity && unvisited.contains(cands[c].index)) {
        unvisited.remove(cands[c].index);
        ++st.discarded;
      }
    }
    return best.index;
  };

  while (unvisited.size() > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, unvisited.size() - 1);
    const int seed = unvisited.items[pick(rng)];
    unvisited.remove(seed);

    std::vector<int> forward, backward;
    for (int pass = 0; pass < 2; ++pass) {
      const double sign = pass == 0 ? 1.0 : -1.0;
      int tip = seed;
      Vec3 dir = sign * pts[seed].dir;
      for (;;) {
        const int next = grow_step(tip, dir);
        if (next < 0) break;
        (pass == 0 ? forward : backward).push_back(next);
        // keep the local direction aligned with the way the chain grows
        dir = pts[next].dir;
        if (dir.dot(pts[next].pos - pts[tip].pos) < 0) dir = -dir;
        tip = next;
      }
    }

    if (forward.empty() && backward.empty()) {
      ++st.discarded;  // singleton group
      continue;
    }
    Polyline poly;
    poly.points.reserve(forward.size() + backward.size() + 1);
    for (auto it = backward.rbegin(); it != backward.rend(); ++it) poly.points.push_back(pts[*it]);
    poly.points.push_back(pts[seed]);
    for (int i : forward) poly.points.push_back(pts[i]);
    st.visited += poly.points.size();
    polylines.push_back(std::move(poly));
  }
  if (stats) *stats = st;
  return polylines;
}

std::vector<OrientedEdgePoint> extract_oriented_points(const field::UdfField& f,
                                                       const ExtractConfig& cfg,
                                                       std::mt19937_64& rng) {
  std::vector<Vec3> seeds = init_points(f, cfg);
  if (seeds.empty()) return {};
  seeds = shift_points(std::move(seeds), f, cfg.shift_iterations);
  seeds = dedupe_points(seeds, f, 2.0 / cfg.grid_m);

  std::vector<std::uint64_t> point_seeds(seeds.size());
  for (auto& s : point_seeds) s = rng();
  std::vector<std::optional<OrientedEdgePoint>> oriented(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    auto local = make_rng(point_seeds[i]);
    oriented[i] = edge_direction(seeds[i], f, cfg, local);
  });

  std::vector<OrientedEdgePoint> out;
  out.reserve(seeds.size());
  for (const auto& p : oriented)
    if (p && p->stability >= cfg.stability_min) out.push_back(*p);
  return out;
}

void save_ply(const std::string& path, const std::vector<OrientedEdgePoint>& pts) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write PLY: " + path);
  f << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
    << "\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nproperty float "
       "ny\nproperty float nz\nend_header\n";
  f.precision(8);
  for (const auto& p : pts)
    f << p.pos.x() << ' ' << p.pos.y() << ' ' << p.pos.z() << ' ' << p.dir.x() << ' ' << p.dir.y()
      << ' ' << p.dir.z() << '\n';
}

}  // namespace ef::extract
