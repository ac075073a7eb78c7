#include "edgefield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

namespace ef::metrics {

namespace {

// Minimal 3D kd-tree for nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts), index_(pts.size()) {
    for (std::size_t i = 0; i < pts.size(); ++i) index_[i] = int(i);
    if (!pts.empty()) build(0, int(pts.size()), 0);
  }

  // returns (index, distance)
  std::pair<int, double> nearest(const Vec3& q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, int(pts_.size()), 0, q, best, best_d2);
    return {index_[best], std::sqrt(best_d2)};
  }

 private:
  void build(int lo, int hi, int axis) {
    if (hi - lo <= 1) return;
    const int mid = (lo + hi) / 2;
    std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                     [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(int lo, int hi, int axis, const Vec3& q, int& best, double& best_d2) const {
    if (lo >= hi) return;
    const int mid = (lo + hi) / 2;
    const Vec3& p = pts_[index_[mid]];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = mid;
    }
    const double diff = q[axis] - p[axis];
    const int next = (axis + 1) % 3;
    if (diff < 0) {
      search(lo, mid, next, q, best, best_d2);
      if (diff * diff < best_d2) search(mid + 1, hi, next, q, best, best_d2);
    } else {
      search(mid + 1, hi, next, q, best, best_d2);
      if (diff * diff < best_d2) search(lo, mid, next, q, best, best_d2);
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<int> index_;
};

std::int64_t voxel_key(const Vec3& p, double voxel) {
  const auto q = [&](double v) { return std::int64_t(std::floor((v + 4.0) / voxel)); };
  return (q(p.x()) << 42) | (q(p.y()) << 21) | q(p.z());
}

}  // namespace

SampledCloud downsample(const SampledCloud& cloud, int resolution) {
  const double voxel = 2.0 / resolution;
  struct Bucket {
    Vec3 sum{Vec3::Zero()};
    std::vector<std::size_t> members;
  };
  std::unordered_map<std::int64_t, Bucket> buckets;
  buckets.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto& b = buckets[voxel_key(cloud.points[i], voxel)];
    b.sum += cloud.points[i];
    b.members.push_back(i);
  }
  std::vector<std::size_t> reps;
  reps.reserve(buckets.size());
  for (const auto& [key, b] : buckets) {
    const Vec3 centroid = b.sum / double(b.members.size());
    std::size_t rep = b.members.front();
    double best = (cloud.points[rep] - centroid).squaredNorm();
    for (std::size_t m : b.members) {
      const double d = (cloud.points[m] - centroid).squaredNorm();
      if (d < best) {
        best = d;
        rep = m;
      }
    }
    reps.push_back(rep);
  }
  std::sort(reps.begin(), reps.end());
  SampledCloud out;
  out.points.reserve(reps.size());
  out.dirs.reserve(reps.size());
  for (std::size_t r : reps) {
    out.points.push_back(cloud.points[r]);
    out.dirs.push_back(cloud.dirs[r]);
  }
  return out;
}

SampledCloud sample_edges(const geom::EdgeSet& set, double spacing) {
  SampledCloud cloud;
  for (const auto& s : geom::sample_edge_points(set, spacing)) {
    cloud.points.push_back(s.pos);
    cloud.dirs.push_back(s.dir);
  }
  return cloud;
}

MetricsReport compute_metrics(const geom::EdgeSet& pred, const geom::EdgeSet& gt,
                              double spacing) {
  if (gt.empty()) throw std::invalid_argument("compute_metrics: empty ground truth");
  const double taus_mu[3] = {5.0, 10.0, 20.0};

  const SampledCloud gt_cloud = downsample(sample_edges(gt, spacing));
  MetricsReport rep;
  rep.gt_samples = gt_cloud.size();

  if (pred.empty()) {
    rep.acc_defined = false;
    rep.acc = std::numeric_limits<double>::quiet_NaN();
    rep.comp = std::numeric_limits<double>::infinity();
    return rep;
  }
  const SampledCloud pred_cloud = downsample(sample_edges(pred, spacing));
  rep.pred_samples = pred_cloud.size();

  const KdTree gt_tree(gt_cloud.points);
  const KdTree pred_tree(pred_cloud.points);

  double cos_sum = 0.0;
  std::size_t cos_count = 0;
  const double norm_tau = 10.0e-3;  // matched pairs inside 10 milliunits

  double acc_sum = 0.0;
  std::size_t p_hit[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pred_cloud.size(); ++i) {
    const auto [j, d] = gt_tree.nearest(pred_cloud.points[i]);
    acc_sum += d;
    for (int t = 0; t < 3; ++t)
      if (d <= taus_mu[t] * 1e-3) ++p_hit[t];
    if (d <= norm_tau) {
      cos_sum += std::abs(pred_cloud.dirs[i].dot(gt_cloud.dirs[j]));
      ++cos_count;
    }
  }
  double comp_sum = 0.0;
  std::size_t r_hit[3] = {0, 0, 0};
  for (std::size_t i = 0; i < gt_cloud.size(); ++i) {
    const auto [j, d] = pred_tree.nearest(gt_cloud.points[i]);
    comp_sum += d;
    for (int t = 0; t < 3; ++t)
      if (d <= taus_mu[t] * 1e-3) ++r_hit[t];
    if (d <= norm_tau) {
      cos_sum += std::abs(gt_cloud.dirs[i].dot(pred_cloud.dirs[j]));
      ++cos_count;
    }
  }

  rep.acc = acc_sum / double(pred_cloud.size()) * 1000.0;
  rep.comp = comp_sum / double(gt_cloud.size()) * 1000.0;
  rep.norm = cos_count > 0 ? 100.0 * cos_sum / double(cos_count) : 0.0;
  for (int t = 0; t < 3; ++t) {
    rep.r[t] = 100.0 * double(r_hit[t]) / double(gt_cloud.size());
    rep.p[t] = 100.0 * double(p_hit[t]) / double(pred_cloud.size());
    rep.f[t] = rep.r[t] + rep.p[t] > 0 ? 2.0 * rep.r[t] * rep.p[t] / (rep.r[t] + rep.p[t]) : 0.0;
  }
  return rep;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["acc"] = r.acc_defined ? nlohmann::json(r.acc) : nlohmann::json(nullptr);
  j["comp"] = std::isfinite(r.comp) ? nlohmann::json(r.comp) : nlohmann::json(nullptr);
  j["empty_prediction"] = !r.acc_defined;
  j["norm"] = r.norm;
  const char* names[3] = {"5", "10", "20"};
  for (int t = 0; t < 3; ++t) {
    j["recall"][names[t]] = r.r[t];
    j["precision"][names[t]] = r.p[t];
    j["fscore"][names[t]] = r.f[t];
  }
  j["pred_samples"] = r.pred_samples;
  j["gt_samples"] = r.gt_samples;
  return j.dump(2);
}

void save_report(const std::string& path, const MetricsReport& r) {
  std::ofstream f(path);
  if (!f) throw std::invalid_argument("cannot write report: " + path);
  f << report_to_json(r) << '\n';
}

}  // namespace ef::metrics
