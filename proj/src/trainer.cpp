#include "edgefield/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace ef::train {

using field::GridField;
using field::GridSample;

// ---------------------------------------------------------------------------
// Ray sampling

RaySampler::RaySampler(const std::vector<scene::View>& views, double edge_pixel_threshold)
    : views_(views) {
  if (views.size() > 0xFF) throw std::invalid_argument("RaySampler: too many views");
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& map = views[v].edge_map;
    const std::size_t n = map.values.size();
    if (n >= (1u << 24)) throw std::invalid_argument("RaySampler: edge map too large");
    for (std::size_t p = 0; p < n; ++p) {
      const std::uint32_t key = std::uint32_t(v) << 24 | std::uint32_t(p);
      if (map.values[p] >= edge_pixel_threshold)
        edge_pixels_.push_back(key);
      else
        non_edge_pixels_.push_back(key);
    }
  }
  if (edge_pixels_.empty() || non_edge_pixels_.empty())
    throw std::invalid_argument("RaySampler: views contain no edge/non-edge pixel split");
}

std::vector<TrainRay> RaySampler::draw(int batch_rays, double edge_fraction,
                                       std::mt19937_64& rng) const {
  const int n_edge = int(edge_fraction * batch_rays);
  std::uniform_int_distribution<std::size_t> pick_edge(0, edge_pixels_.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_non(0, non_edge_pixels_.size() - 1);
  std::vector<TrainRay> rays;
  rays.reserve(batch_rays);
  for (int i = 0; i < batch_rays; ++i) {
    const std::uint32_t key = i < n_edge ? edge_pixels_[pick_edge(rng)] : non_edge_pixels_[pick_non(rng)];
    const std::size_t v = key >> 24;
    const std::size_t p = key & 0xFFFFFF;
    const auto& view = views_[v];
    const int px = int(p % view.edge_map.width);
    const int py = int(p / view.edge_map.width);
    TrainRay tr;
    tr.target = view.edge_map.values[p];
    tr.ray = scene::pixel_ray(view.camera, px, py);
    rays.push_back(tr);
  }
  return rays;
}

std::vector<TrainRay> sample_training_rays(const std::vector<scene::View>& views,
                                           const TrainConfig& cfg, std::mt19937_64& rng) {
  return RaySampler(views, cfg.edge_pixel_threshold).draw(cfg.batch_rays, cfg.edge_ray_fraction, rng);
}

// ---------------------------------------------------------------------------
// Batch preparation

namespace {

render::RenderParams params_for(const GridField& g) {
  render::RenderParams p;
  p.beta = g.beta;
  p.k = g.k;
  return p;
}

}  // namespace

TrainBatch prepare_batch(const GridField& g, std::vector<TrainRay> rays, std::mt19937_64& rng) {
  TrainBatch batch;
  batch.rays = std::move(rays);
  batch.depths.resize(batch.rays.size());
  std::vector<std::uint64_t> seeds(batch.rays.size());
  for (auto& s : seeds) s = rng();
  const render::RenderParams p = params_for(g);
  parallel_for(batch.rays.size(), [&](std::size_t i) {
    if (!batch.rays[i].ray) return;
    auto local = make_rng(seeds[i]);
    batch.depths[i] = render::sample_ray(g, *batch.rays[i].ray, p, local).t;
  });
  std::size_t total = 0;
  for (const auto& d : batch.depths) total += d.size();
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  batch.uniform_probes.reserve(total);
  for (std::size_t i = 0; i < total; ++i)
    batch.uniform_probes.emplace_back(uni(rng), uni(rng), uni(rng));
  return batch;
}

std::vector<std::vector<double>> compute_psi(const GridField& g, const TrainBatch& batch) {
  std::vector<std::vector<double>> psi(batch.rays.size());
  const render::RenderParams p = params_for(g);
  parallel_for(batch.rays.size(), [&](std::size_t i) {
    if (!batch.rays[i].ray || batch.depths[i].empty()) return;
    const auto s = render::query_samples(g, *batch.rays[i].ray, batch.depths[i]);
    psi[i] = render::visibility_psi(s, p.beta, p.alpha);
  });
  return psi;
}

// ---------------------------------------------------------------------------
// Loss forward/backward
//
// Per interval j the density is
//   sigma_j = psi_j * omega(+u)_j + (1 - psi_j) * omega(-u)_j,
//   omega(x)_j = max((1 - Phi_k(x_{j+1}) / Phi_k(x_j)) / delta_j, 0),
// and the rendered value is e_hat = 1 - exp(-sum sigma_j delta_j). The
// backward pass differentiates this chain with respect to the per-sample u
// (and k), holding psi and the sample depths fixed, then scatters du through
// the trilinear weights onto the grid nodes.

namespace {

struct NodeGrad {
  int node;
  double g;
};

struct RayEval {
  double e_hat = 0.0;
  double eik_sum = 0.0;  // sum of (|grad| - 1)^2 over this ray's samples
  double k_grad = 0.0;
  std::vector<NodeGrad> grads;
};

// d/da log(1 + e^a) = logistic(a)
struct OmegaBackward {
  double du_left = 0.0;
  double du_right = 0.0;
  double dk = 0.0;
};

double omega_forward(double u0, double u1, double delta, double k, double sign,
                     OmegaBackward* back) {
  const double a0 = -k * sign * u0;
  const double a1 = -k * sign * u1;
  const double ratio = std::exp(render::log1pexp(a0) - render::log1pexp(a1));
  const double q = (1.0 - ratio) / delta;
  if (back) {
    if (q > 0.0) {
      const double d_ratio = -1.0 / delta;          // dq/dratio
      const double d0 = d_ratio * ratio * render::logistic(a0);   // d q / d a0
      const double d1 = -d_ratio * ratio * render::logistic(a1);  // d q / d a1
      back->du_left = d0 * (-k * sign);
      back->du_right = d1 * (-k * sign);
      back->dk = d0 * (-sign * u0) + d1 * (-sign * u1);
    } else {
      *back = OmegaBackward{};
    }
  }
  return std::max(q, 0.0);
}

void scatter(const GridSample& gs, double du, const Vec3& dgrad, std::vector<NodeGrad>& out) {
  for (int c = 0; c < 8; ++c) {
    if (!gs.active[c]) continue;
    const double g = du * gs.w[c] + dgrad.dot(gs.dw[c]);
    if (g != 0.0) out.push_back({gs.node[c], g});
  }
}

// Evaluates one ray's rendered value and eikonal terms; when edge_grad_scale
// is nonzero also accumulates d(loss)/d(node) entries. eik_grad_scale covers
// the lambda / probe-count factor for the eikonal part.
RayEval eval_ray(const GridField& g, const scene::Ray& ray, const std::vector<double>& t,
                 double target, const std::vector<double>* psi_frozen, bool want_grad,
                 double edge_mse_scale, double eik_grad_scale) {
  const std::size_t n = t.size();
  RayEval ev;
  std::vector<GridSample> gs(n);
  for (std::size_t i = 0; i < n; ++i) gs[i] = g.sample(ray.origin + t[i] * ray.direction);

  // eikonal at ray samples
  for (std::size_t i = 0; i < n; ++i) {
    const double gn = gs[i].grad.norm();
    ev.eik_sum += (gn - 1.0) * (gn - 1.0);
    if (want_grad && gn > 1e-12) {
      const Vec3 dgrad = eik_grad_scale * 2.0 * (gn - 1.0) / gn * gs[i].grad;
      scatter(gs[i], 0.0, dgrad, ev.grads);
    }
  }
  if (n < 2) return ev;

  std::vector<double> psi;
  if (psi_frozen) {
    psi = *psi_frozen;
  } else {
    render::RaySamples rs;
    rs.t = t;
    rs.u.resize(n);
    rs.cos_theta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rs.u[i] = gs[i].u;
      const double gn = gs[i].grad.norm();
      rs.cos_theta[i] = gn > 1e-12 ? ray.direction.dot(gs[i].grad) / gn : 0.0;
    }
    psi = render::visibility_psi(rs, g.beta, 20.0);
  }

  std::vector<double> delta(n - 1), sigma(n - 1);
  std::vector<OmegaBackward> back_pos(n - 1), back_neg(n - 1);
  std::vector<double> psi_j(n - 1);
  double accum = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    delta[j] = std::max(t[j + 1] - t[j], 1e-12);
    psi_j[j] = psi[j];
    const double op = omega_forward(gs[j].u, gs[j + 1].u, delta[j], g.k, +1.0,
                                    want_grad ? &back_pos[j] : nullptr);
    const double on = omega_forward(gs[j].u, gs[j + 1].u, delta[j], g.k, -1.0,
                                    want_grad ? &back_neg[j] : nullptr);
    sigma[j] = psi[j] * op + (1.0 - psi[j]) * on;
    accum += sigma[j] * delta[j];
  }
  ev.e_hat = 1.0 - std::exp(-accum);

  if (want_grad) {
    const double g_ehat = edge_mse_scale * 2.0 * (ev.e_hat - target);
    const double g_accum = g_ehat * std::exp(-accum);
    std::vector<double> du(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double g_sigma = g_accum * delta[j];
      const double g_op = g_sigma * psi_j[j];
      const double g_on = g_sigma * (1.0 - psi_j[j]);
      du[j] += g_op * back_pos[j].du_left + g_on * back_neg[j].du_left;
      du[j + 1] += g_op * back_pos[j].du_right + g_on * back_neg[j].du_right;
      ev.k_grad += g_op * back_pos[j].dk + g_on * back_neg[j].dk;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (du[i] != 0.0) scatter(gs[i], du[i], Vec3::Zero(), ev.grads);
  }
  return ev;
}

struct ProbeEval {
  double eik_sum = 0.0;
  std::vector<NodeGrad> grads;
};

}  // namespace

LossBreakdown loss(const GridField& g, const TrainBatch& batch, const TrainConfig& cfg,
                   const std::vector<std::vector<double>>* frozen_psi) {
  if (batch.rays.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<RayEval> evals(batch.rays.size());
  parallel_for(batch.rays.size(), [&](std::size_t i) {
    if (!batch.rays[i].ray || batch.depths[i].empty()) return;
    const std::vector<double>* psi = frozen_psi ? &(*frozen_psi)[i] : nullptr;
    evals[i] = eval_ray(g, *batch.rays[i].ray, batch.depths[i], batch.rays[i].target, psi,
                        false, 0.0, 0.0);
  });
  std::size_t n_samples = 0;
  for (const auto& d : batch.depths) n_samples += d.size();
  const std::size_t n_probes = n_samples + batch.uniform_probes.size();

  std::vector<double> probe_eik(batch.uniform_probes.size());
  parallel_for(batch.uniform_probes.size(), [&](std::size_t i) {
    const double gn = g.query(batch.uniform_probes[i]).grad.norm();
    probe_eik[i] = (gn - 1.0) * (gn - 1.0);
  });

  LossBreakdown out;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const double d = evals[i].e_hat - batch.rays[i].target;
    out.edge_mse += d * d;
    out.eikonal += evals[i].eik_sum;
  }
  for (double e : probe_eik) out.eikonal += e;
  out.edge_mse /= double(batch.rays.size());
  out.eikonal = n_probes > 0 ? out.eikonal / double(n_probes) : 0.0;
  out.total = out.edge_mse + cfg.lambda * out.eikonal;
  return out;
}

LossGradient loss_gradient(const GridField& g, const TrainBatch& batch, const TrainConfig& cfg) {
  if (batch.rays.empty()) throw std::invalid_argument("loss_gradient: empty batch");
  std::size_t n_samples = 0;
  for (const auto& d : batch.depths) n_samples += d.size();
  const std::size_t n_probes = n_samples + batch.uniform_probes.size();
  const double edge_scale = 1.0 / double(batch.rays.size());
  const double eik_scale = n_probes > 0 ? cfg.lambda / double(n_probes) : 0.0;

  std::vector<RayEval> evals(batch.rays.size());
  parallel_for(batch.rays.size(), [&](std::size_t i) {
    if (!batch.rays[i].ray || batch.depths[i].empty()) return;
    evals[i] = eval_ray(g, *batch.rays[i].ray, batch.depths[i], batch.rays[i].target, nullptr,
                        true, edge_scale, eik_scale);
  });

  std::vector<ProbeEval> probes(batch.uniform_probes.size());
  parallel_for(batch.uniform_probes.size(), [&](std::size_t i) {
    const GridSample gs = g.sample(batch.uniform_probes[i]);
    const double gn = gs.grad.norm();
    probes[i].eik_sum = (gn - 1.0) * (gn - 1.0);
    if (gn > 1e-12) {
      const Vec3 dgrad = eik_scale * 2.0 * (gn - 1.0) / gn * gs.grad;
      for (int c = 0; c < 8; ++c) {
        if (!gs.active[c]) continue;
        const double gv = dgrad.dot(gs.dw[c]);
        if (gv != 0.0) probes[i].grads.push_back({gs.node[c], gv});
      }
    }
  });

  LossGradient out;
  out.nodes.assign(g.node_count(), 0.0);
  // Merge in ray order, then probe order: the reduction order is fixed no
  // matter how many threads computed the pieces.
  for (std::size_t i = 0; i < evals.size(); ++i) {
    for (const auto& ng : evals[i].grads) out.nodes[ng.node] += ng.g;
    out.k += evals[i].k_grad;
    const double d = evals[i].e_hat - batch.rays[i].target;
    out.value.edge_mse += d * d;
    out.value.eikonal += evals[i].eik_sum;
  }
  for (const auto& pe : probes) {
    for (const auto& ng : pe.grads) out.nodes[ng.node] += ng.g;
    out.value.eikonal += pe.eik_sum;
  }
  out.value.edge_mse /= double(batch.rays.size());
  out.value.eikonal = n_probes > 0 ? out.value.eikonal / double(n_probes) : 0.0;
  out.value.total = out.value.edge_mse + cfg.lambda * out.value.eikonal;
  out.beta = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Optimization

field::GridField fit_grid(const std::vector<scene::View>& views, int resolution,
                          const TrainConfig& cfg, std::vector<LossLogEntry>* log) {
  if (views.size() < 3) throw std::invalid_argument("fit_grid: need at least 3 views");
  GridField g = GridField::init_sphere(resolution, 0.5);
  RaySampler sampler(views, cfg.edge_pixel_threshold);

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m(g.node_count(), 0.0), v(g.node_count(), 0.0);
  double m_beta = 0, v_beta = 0, m_k = 0, v_k = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    auto rng = make_rng(stage_seed(cfg.seed, "iter" + std::to_string(iter)));
    auto rays = sampler.draw(cfg.batch_rays, cfg.edge_ray_fraction, rng);
    const TrainBatch batch = prepare_batch(g, std::move(rays), rng);
    const LossGradient lg = loss_gradient(g, batch, cfg);
    if (!std::isfinite(lg.value.total))
      throw NumericError("fit_grid: non-finite loss at iteration " + std::to_string(iter) +
                         " (edge_mse=" + std::to_string(lg.value.edge_mse) +
                         ", eikonal=" + std::to_string(lg.value.eikonal) + ")");

    const double t = iter + 1;
    const double corr1 = 1.0 - std::pow(b1, t);
    const double corr2 = 1.0 - std::pow(b2, t);
    auto& values = g.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double grad = lg.nodes[i];
      m[i] = b1 * m[i] + (1 - b1) * grad;
      v[i] = b2 * v[i] + (1 - b2) * grad * grad;
      values[i] -= cfg.learning_rate * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + eps);
    }
    auto adam_scalar = [&](double& x, double& ms, double& vs, double grad, double lr) {
      ms = b1 * ms + (1 - b1) * grad;
      vs = b2 * vs + (1 - b2) * grad * grad;
      x -= lr * (ms / corr1) / (std::sqrt(vs / corr2) + eps);
    };
    adam_scalar(g.beta, m_beta, v_beta, lg.beta, cfg.learning_rate_bk);
    adam_scalar(g.k, m_k, v_k, lg.k, cfg.learning_rate_bk);
    g.beta = std::clamp(g.beta, 1.0, 1e4);
    g.k = std::clamp(g.k, 1.0, 1e4);

    if (log) log->push_back({iter, lg.value.edge_mse, lg.value.eikonal, g.beta, g.k});
  }
  return g;
}

}  // namespace ef::train
