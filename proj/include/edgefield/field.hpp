#ifndef EDGEFIELD_FIELD_HPP
#define EDGEFIELD_FIELD_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/geometry.hpp"

namespace ef::field {

struct FieldQuery {
  double u = 0.0;   // unsigned distance, box units
  Vec3 grad{Vec3::Zero()};
};

/// Queryable unsigned distance field over the unit box [-1,1]^3.
class UdfField {
 public:
  virtual ~UdfField() = default;
  virtual FieldQuery query(const Vec3& x) const = 0;
};

/// Exact field backed by the per-edge distance oracle. Gradient is
/// (x - nearest)/u away from edges; on an edge (u <= 1e-9) the direction is
/// undefined and a fixed unit x vector is returned.
class AnalyticField : public UdfField {
 public:
  explicit AnalyticField(geom::EdgeSet edges);
  FieldQuery query(const Vec3& x) const override;
  const geom::EdgeSet& edges() const { return edges_; }

 private:
  geom::EdgeSet edges_;
  std::vector<std::size_t> by_id_;                 // edge indices in ascending id order
  std::vector<Eigen::AlignedBox3d> bounds_;        // per-edge control hull boxes
};

/// Everything the trainer needs to backpropagate through one interpolation:
/// per-corner node index, trilinear weight, weight gradient, and whether the
/// node value was positive (the query clamps stored values at zero).
struct GridSample {
  double u = 0.0;
  Vec3 grad{Vec3::Zero()};
  int node[8] = {0};
  double w[8] = {0};
  Vec3 dw[8];
  bool active[8] = {false};
};

/// Trilinear voxel grid over [-1,1]^3 with M nodes per axis. Stored node
/// values may be negative; queries interpolate max(value, 0). beta and k are
/// the trainable rendering sharpness parameters carried with the field.
class GridField : public UdfField {
 public:
  GridField(int resolution, std::vector<double> values, double beta, double k);

  static GridField init_sphere(int resolution, double radius);

  FieldQuery query(const Vec3& x) const override;
  GridSample sample(const Vec3& x) const;

  int resolution() const { return m_; }
  double spacing() const { return 2.0 / (m_ - 1); }
  Vec3 node_position(int ix, int iy, int iz) const;
  std::size_t node_count() const { return values_.size(); }
  std::size_t node_index(int ix, int iy, int iz) const {
    return (std::size_t(iz) * m_ + iy) * m_ + ix;
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double beta = 20.0;
  double k = 20.0;

 private:
  int m_;
  std::vector<double> values_;
};

/// -grad/|grad|; empty when the gradient is too small to normalize.
std::optional<Vec3> inverse_normal(const FieldQuery& q);
std::optional<Vec3> inverse_normal(const UdfField& f, const Vec3& x);

// Binary grid file: magic "UDFG", little-endian u32 M, f32 beta, f32 k,
// then M^3 f32 node values in x-fastest order.
void save_grid(const std::string& path, const GridField& g);
GridField load_grid(const std::string& path);

}  // namespace ef::field

#endif
