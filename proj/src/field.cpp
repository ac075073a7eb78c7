#include "edgefield/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ef::field {

namespace {

Eigen::AlignedBox3d edge_bounds(const geom::Edge& e) {
  Eigen::AlignedBox3d box;
  if (const auto* seg = std::get_if<geom::LineSegment>(&e)) {
    box.extend(seg->a);
    box.extend(seg->b);
  } else {
    // A Bezier lies inside the convex hull of its control points.
    for (const auto& p : std::get<geom::CubicBezier>(e).p) box.extend(p);
  }
  return box;
}

}  // namespace

AnalyticField::AnalyticField(geom::EdgeSet edges) : edges_(std::move(edges)) {
  if (edges_.empty()) throw std::invalid_argument("AnalyticField: empty edge set");
  by_id_.resize(edges_.size());
  for (std::size_t i = 0; i < by_id_.size(); ++i) by_id_[i] = i;
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return edges_.edges[a].id < edges_.edges[b].id; });
  bounds_.reserve(edges_.size());
  for (const auto& rec : edges_.edges) bounds_.push_back(edge_bounds(rec.shape));
}

FieldQuery AnalyticField::query(const Vec3& x) const {
  double best = std::numeric_limits<double>::infinity();
  Vec3 nearest = Vec3::Zero();
  for (std::size_t idx : by_id_) {
    // Distance to the control hull box lower-bounds the edge distance.
    if (bounds_[idx].exteriorDistance(x) >= best) continue;
    const auto nr = geom::nearest_on_edge(edges_.edges[idx].shape, x);
    if (nr.dist < best) {
      best = nr.dist;
      nearest = geom::eval_edge(edges_.edges[idx].shape, nr.s);
    }
  }
  FieldQuery q;
  q.u = best;
  q.grad = best > 1e-9 ? Vec3((x - nearest) / best) : Vec3::UnitX();
  return q;
}

GridField::GridField(int resolution, std::vector<double> values, double beta_, double k_)
    : beta(beta_), k(k_), m_(resolution), values_(std::move(values)) {
  if (m_ < 8) throw std::invalid_argument("GridField: resolution must be >= 8");
  if (values_.size() != std::size_t(m_) * m_ * m_)
    throw std::invalid_argument("GridField: value count does not match resolution");
  if (!(beta > 0) || !(k > 0)) throw std::invalid_argument("GridField: beta and k must be > 0");
}

GridField GridField::init_sphere(int resolution, double radius) {
  if (!(radius > 0 && radius < 1)) throw std::invalid_argument("init_sphere: radius must be in (0,1)");
  std::vector<double> v(std::size_t(resolution) * resolution * resolution);
  const double h = 2.0 / (resolution - 1);
  std::size_t i = 0;
  for (int iz = 0; iz < resolution; ++iz)
    for (int iy = 0; iy < resolution; ++iy)
      for (int ix = 0; ix < resolution; ++ix)
        v[i++] = std::abs(Vec3(-1 + ix * h, -1 + iy * h, -1 + iz * h).norm() - radius);
  return GridField(resolution, std::move(v), 20.0, 20.0);
}

Vec3 GridField::node_position(int ix, int iy, int iz) const {
  const double h = spacing();
  return Vec3(-1 + ix * h, -1 + iy * h, -1 + iz * h);
}

GridSample GridField::sample(const Vec3& x) const {
  GridSample gs;
  const double h = spacing();
  int cell[3];
  double f[3];
  for (int d = 0; d < 3; ++d) {
    const double xd = std::clamp(x[d], -1.0, 1.0);
    double s = (xd + 1.0) / h;
    // Snap to node planes so queries at exact node positions reproduce the
    // stored value bit for bit.
    const double r = std::round(s);
    if (std::abs(s - r) < 1e-12) s = r;
    int c = int(std::floor(s));
    c = std::clamp(c, 0, m_ - 2);
    cell[d] = c;
    f[d] = s - c;
  }
  const double wx[2] = {1 - f[0], f[0]};
  const double wy[2] = {1 - f[1], f[1]};
  const double wz[2] = {1 - f[2], f[2]};
  const double gx[2] = {-1 / h, 1 / h};

  int corner = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++corner) {
        const std::size_t idx = node_index(cell[0] + dx, cell[1] + dy, cell[2] + dz);
        const double v = values_[idx];
        const bool active = v > 0.0;
        const double vc = active ? v : 0.0;
        const double w = wx[dx] * wy[dy] * wz[dz];
        const Vec3 dw(gx[dx] * wy[dy] * wz[dz], wx[dx] * gx[dy] * wz[dz], wx[dx] * wy[dy] * gx[dz]);
        gs.node[corner] = int(idx);
        gs.w[corner] = w;
        gs.dw[corner] = dw;
        gs.active[corner] = active;
        gs.u += w * vc;
        gs.grad += dw * vc;
      }
  return gs;
}

FieldQuery GridField::query(const Vec3& x) const {
  const GridSample gs = sample(x);
  return FieldQuery{gs.u, gs.grad};
}

std::optional<Vec3> inverse_normal(const FieldQuery& q) {
  const double n = q.grad.norm();
  if (n <= 1e-8) return std::nullopt;
  return Vec3(-q.grad / n);
}

std::optional<Vec3> inverse_normal(const UdfField& f, const Vec3& x) {
  return inverse_normal(f.query(x));
}

// ---------------------------------------------------------------------------
// Grid file IO

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                        (unsigned char)(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_grid(const std::string& path, const GridField& g) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write grid file: " + path);
  f.write("UDFG", 4);
  put_u32(f, std::uint32_t(g.resolution()));
  put_f32(f, float(g.beta));
  put_f32(f, float(g.k));
  for (double v : g.values()) put_f32(f, float(v));
}

GridField load_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open grid file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "UDFG")
    throw std::invalid_argument("not a grid file: " + path);
  const int m = int(get_u32(f));
  const double beta = get_f32(f);
  const double k = get_f32(f);
  std::vector<double> values(std::size_t(m) * m * m);
  for (auto& v : values) v = get_f32(f);
  if (!f) throw std::invalid_argument("truncated grid file: " + path);
  return GridField(m, std::move(values), beta, k);
}

}  // namespace ef::field
