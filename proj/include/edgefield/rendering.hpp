#ifndef EDGEFIELD_RENDERING_HPP
#define EDGEFIELD_RENDERING_HPP

#include <optional>
#include <vector>

#include "edgefield/core.hpp"
#include "edgefield/field.hpp"
#include "edgefield/scene.hpp"

namespace ef::render {

struct RenderParams {
  double beta = 20.0;   // logistic sharpness of the intersection probability
  double k = 20.0;      // sigmoid sharpness of the density mapping
  double alpha = 20.0;  // fixed intersection-rate scale
  int init_samples = 64;
  int importance_rounds = 5;
  int importance_per_round = 16;
};

/// Field queries along one ray, ascending in depth.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> u;
  std::vector<Vec3> grad;
  std::vector<double> cos_theta;  // cos of angle between ray direction and grad

  std::size_t size() const { return t.size(); }
};

struct RenderResult {
  double e_hat = 0.0;           // rendered edge value, 1 - final transmittance
  std::vector<double> weights;  // per interval, sums to e_hat
  std::vector<double> psi;      // per sample, visibility
  std::vector<double> sigma;    // per interval, effective density
};

double log1pexp(double a);  // log(1 + e^a), stable for large |a|
double logistic(double a);
double phi_sigmoid(double x, double k);
double logistic_bump(double x, double beta);  // beta e^{-beta x} / (1+e^{-beta x})^2

/// Probability that the ray terminates within a step of length delta at
/// distance u from the nearest edge: 1 - exp(-alpha * bump(u) * delta).
double intersection_prob(double u, double delta, double beta, double alpha = 20.0);

std::vector<double> visibility_psi(const RaySamples& s, double beta, double alpha);

/// Per-interval density from forward differences of the sigmoid along the
/// ray, clamped at zero; `sign` applies the density to +u or -u.
std::vector<double> density_omega_s(const RaySamples& s, double k, double sign);

std::vector<double> sigma_u(const RaySamples& s, const RenderParams& p);

RaySamples query_samples(const field::UdfField& f, const scene::Ray& r,
                         const std::vector<double>& t);

/// 64 stratified samples refined by five rounds of importance sampling from
/// the current interval weights (16 new samples per round).
RaySamples sample_ray(const field::UdfField& f, const scene::Ray& r, const RenderParams& p,
                      std::mt19937_64& rng);

RenderResult render_edge(const RaySamples& s, const RenderParams& p);
RenderResult render_edge(const field::UdfField& f, const scene::Ray& r, const RenderParams& p,
                         std::mt19937_64& rng);

/// Reference renderer with the naive density alpha*bump(u): its weight peak
/// sits in front of the true crossing, which the tests quantify.
RenderResult render_edge_biased(const RaySamples& s, const RenderParams& p);

/// Midpoint of the maximal-weight interval; empty when every weight is zero.
std::optional<double> weight_argmax_depth(const RenderResult& r, const RaySamples& s);

}  // namespace ef::render

#endif
