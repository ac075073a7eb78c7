#include "edgefield/rendering.hpp"

#include <algorithm>
#include <cmath>

namespace ef::render {

double log1pexp(double a) {
  if (a > 35.0) return a + std::exp(-a);
  if (a < -35.0) return std::exp(a);
  return std::log1p(std::exp(a));
}

double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

double phi_sigmoid(double x, double k) {
  if (!(k > 0)) throw std::invalid_argument("phi_sigmoid: k must be > 0");
  return logistic(k * x);
}

double logistic_bump(double x, double beta) {
  const double e = std::exp(-beta * x);
  const double denom = 1.0 + e;
  return beta * e / (denom * denom);
}

double intersection_prob(double u, double delta, double beta, double alpha) {
  if (!(delta > 0)) throw std::invalid_argument("intersection_prob: delta must be > 0");
  return 1.0 - std::exp(-alpha * logistic_bump(u, beta) * delta);
}

std::vector<double> visibility_psi(const RaySamples& s, double beta, double alpha) {
  const std::size_t n = s.size();
  std::vector<double> psi(n, 1.0);
  double acc = 1.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    psi[j] = acc;
    // The mask opens once the gradient ahead turns along the ray, i.e. the
    // interval [t_j, t_{j+1}] straddles the crossing.
    const double m = s.cos_theta[j + 1] >= 0.0 ? 1.0 : 0.0;
    const double delta = std::max(s.t[j + 1] - s.t[j], 1e-12);
    const double h = 1.0 - std::exp(-alpha * logistic_bump(s.u[j], beta) * delta);
    acc *= 1.0 - h * m;
  }
  if (n > 0) psi[n - 1] = acc;
  return psi;
}

std::vector<double> density_omega_s(const RaySamples& s, double k, double sign) {
  const std::size_t n = s.size();
  std::vector<double> omega(n > 0 ? n - 1 : 0, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double delta = std::max(s.t[j + 1] - s.t[j], 1e-12);
    // 1 - Phi_k(x_{j+1}) / Phi_k(x_j), computed through log(1+e^-kx) so that
    // the ratio survives sigmoid saturation at large k*u.
    const double ratio = std::exp(log1pexp(-k * sign * s.u[j]) - log1pexp(-k * sign * s.u[j + 1]));
    omega[j] = std::max((1.0 - ratio) / delta, 0.0);
  }
  return omega;
}

std::vector<double> sigma_u(const RaySamples& s, const RenderParams& p) {
  const auto psi = visibility_psi(s, p.beta, p.alpha);
  const auto omega_pos = density_omega_s(s, p.k, +1.0);
  const auto omega_neg = density_omega_s(s, p.k, -1.0);
  std::vector<double> sigma(omega_pos.size());
  for (std::size_t j = 0; j < sigma.size(); ++j)
    sigma[j] = psi[j] * omega_pos[j] + (1.0 - psi[j]) * omega_neg[j];
  return sigma;
}

RaySamples query_samples(const field::UdfField& f, const scene::Ray& r,
                         const std::vector<double>& t) {
  RaySamples s;
  s.t = t;
  s.u.resize(t.size());
  s.grad.resize(t.size());
  s.cos_theta.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const field::FieldQuery q = f.query(r.origin + t[i] * r.direction);
    s.u[i] = q.u;
    s.grad[i] = q.grad;
    const double gn = q.grad.norm();
    s.cos_theta[i] = gn > 1e-12 ? r.direction.dot(q.grad) / gn : 0.0;
  }
  return s;
}

namespace {

RenderResult accumulate(const RaySamples& s, const std::vector<double>& sigma,
                        const std::vector<double>& psi) {
  RenderResult res;
  res.sigma = sigma;
  res.psi = psi;
  res.weights.resize(sigma.size());
  double transmittance = 1.0;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    const double delta = std::max(s.t[j + 1] - s.t[j], 1e-12);
    const double a = std::exp(-sigma[j] * delta);
    res.weights[j] = transmittance * (1.0 - a);
    transmittance *= a;
  }
  res.e_hat = 1.0 - transmittance;
  return res;
}

// Draw `count` stratified samples from the piecewise-constant distribution
// over intervals proportional to weights (plus a floor so degenerate weights
// fall back to uniform).
std::vector<double> importance_draw(const RaySamples& s, const std::vector<double>& weights,
                                    int count, std::mt19937_64& rng) {
  const std::size_t n = weights.size();
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) cdf[j + 1] = cdf[j] + weights[j] + 1e-5;
  const double total = cdf.back();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double v = (i + uni(rng)) / count * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), v);
    std::size_t j = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf.begin() - 1, 0), n - 1);
    const double frac = (v - cdf[j]) / std::max(cdf[j + 1] - cdf[j], 1e-300);
    out.push_back(s.t[j] + frac * (s.t[j + 1] - s.t[j]));
  }
  return out;
}

void merge_sorted(RaySamples& s, const field::UdfField& f, const scene::Ray& r,
                  std::vector<double> t_new) {
  std::sort(t_new.begin(), t_new.end());
  std::vector<double> merged;
  merged.reserve(s.t.size() + t_new.size());
  std::merge(s.t.begin(), s.t.end(), t_new.begin(), t_new.end(), std::back_inserter(merged));
  // keep depths strictly ascending
  for (std::size_t i = 1; i < merged.size(); ++i)
    if (merged[i] <= merged[i - 1]) merged[i] = std::nextafter(merged[i - 1], 1e300);
  s = query_samples(f, r, merged);
}

}  // namespace

RaySamples sample_ray(const field::UdfField& f, const scene::Ray& r, const RenderParams& p,
                      std::mt19937_64& rng) {
  if (!(r.t_near < r.t_far)) throw std::invalid_argument("sample_ray: empty ray interval");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> t;
  t.reserve(p.init_samples);
  const double span = r.t_far - r.t_near;
  for (int i = 0; i < p.init_samples; ++i)
    t.push_back(r.t_near + (i + uni(rng)) / p.init_samples * span);
  RaySamples s = query_samples(f, r, t);
  for (int round = 0; round < p.importance_rounds; ++round) {
    const RenderResult res = render_edge(s, p);
    merge_sorted(s, f, r, importance_draw(s, res.weights, p.importance_per_round, rng));
  }
  return s;
}

RenderResult render_edge(const RaySamples& s, const RenderParams& p) {
  return accumulate(s, sigma_u(s, p), visibility_psi(s, p.beta, p.alpha));
}

RenderResult render_edge(const field::UdfField& f, const scene::Ray& r, const RenderParams& p,
                         std::mt19937_64& rng) {
  return render_edge(sample_ray(f, r, p, rng), p);
}

RenderResult render_edge_biased(const RaySamples& s, const RenderParams& p) {
  const std::size_t n = s.size();
  std::vector<double> sigma(n > 0 ? n - 1 : 0);
  for (std::size_t j = 0; j + 1 < n; ++j) sigma[j] = p.alpha * logistic_bump(s.u[j], p.beta);
  return accumulate(s, sigma, std::vector<double>(n, 1.0));
}

std::optional<double> weight_argmax_depth(const RenderResult& r, const RaySamples& s) {
  std::size_t best = 0;
  double best_w = 0.0;
  for (std::size_t j = 0; j < r.weights.size(); ++j)
    if (r.weights[j] > best_w) {
      best_w = r.weights[j];
      best = j;
    }
  if (best_w <= 0.0) return std::nullopt;
  return 0.5 * (s.t[best] + s.t[best + 1]);
}

}  // namespace ef::render
