#include "random_effects.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace abcf {

void draw_u(std::span<const double> r, const VarianceState& vs,
            std::span<const double> w, Rng& rng, std::span<double> u_out) {
  if (vs.sigma_eps2 <= 0.0) throw NumericError("draw_u: sigma_eps2 must be positive");
  if (vs.sigma_u == 0.0) {
    std::fill(u_out.begin(), u_out.end(), 0.0);
    return;
  }
  const double inv_su2 = 1.0 / (vs.sigma_u * vs.sigma_u);
  for (std::size_t j = 0; j < r.size(); ++j) {
    double k = w[j] / vs.sigma_eps2;
    double V = 1.0 / (inv_su2 + k);
    u_out[j] = V * k * r[j] + std::sqrt(V) * rng.normal();
  }
}

namespace {

// 2x2 posterior covariance and mean for (u, v) at one unit.
struct UvPosterior {
  double c11, c12, c22;  // covariance
  double mu, mv;         // mean
};

UvPosterior uv_posterior(double r, double k, double su, double sv, double rho, int z) {
  rho = std::clamp(rho, -0.999, 0.999);  // keep the prior invertible at the boundary
  double su2 = su * su, sv2 = sv * sv;
  double c = rho * su * sv;
  double det = su2 * sv2 - c * c;
  // Posterior precision = prior precision + k a a^T with a = (1, z), z in {0,1}.
  double p11 = sv2 / det + k;
  double p12 = -c / det + k * z;
  double p22 = su2 / det + k * z;  // z^2 = z
  double detp = p11 * p22 - p12 * p12;
  UvPosterior out;
  out.c11 = p22 / detp;
  out.c12 = -p12 / detp;
  out.c22 = p11 / detp;
  double kr = k * r;
  out.mu = out.c11 * kr + out.c12 * (kr * z);
  out.mv = out.c12 * kr + out.c22 * (kr * z);
  return out;
}

}  // namespace

void draw_uv(std::span<const double> r, const VarianceState& vs,
             std::span<const double> w, std::span<const int> z, Rng& rng,
             std::span<double> u_out, std::span<double> v_out) {
  if (vs.sigma_eps2 <= 0.0) throw NumericError("draw_uv: sigma_eps2 must be positive");
  const double su = vs.sigma_u, sv = vs.sigma_v, rho = vs.rho;
  const std::size_t n = r.size();

  // Pass 1: u from its marginal posterior. Control units (and sigma_v = 0)
  // use the same arithmetic as draw_u so the reduction is exact.
  if (su == 0.0) {
    std::fill(u_out.begin(), u_out.end(), 0.0);
  } else {
    const double inv_su2 = 1.0 / (su * su);
    for (std::size_t j = 0; j < n; ++j) {
      double k = w[j] / vs.sigma_eps2;
      if (z[j] == 0 || sv == 0.0) {
        double V = 1.0 / (inv_su2 + k);
        u_out[j] = V * k * r[j] + std::sqrt(V) * rng.normal();
      } else {
        UvPosterior post = uv_posterior(r[j], k, su, sv, rho, 1);
        u_out[j] = post.mu + std::sqrt(post.c11) * rng.normal();
      }
    }
  }

  // Pass 2: v given the realized u.
  if (sv == 0.0) {
    std::fill(v_out.begin(), v_out.end(), 0.0);
    return;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double k = w[j] / vs.sigma_eps2;
    if (su == 0.0) {
      // Prior factorizes; only treated units carry likelihood for v.
      if (z[j] == 1) {
        double prec = 1.0 / (sv * sv) + k;
        v_out[j] = k * r[j] / prec + rng.normal() / std::sqrt(prec);
      } else {
        v_out[j] = sv * rng.normal();
      }
    } else if (z[j] == 0) {
      // Conditional prior given u.
      double mean = rho * (sv / su) * u_out[j];
      double var = sv * sv * (1.0 - rho * rho);
      v_out[j] = mean + std::sqrt(var) * rng.normal();
    } else {
      UvPosterior post = uv_posterior(r[j], k, su, sv, rho, 1);
      double mean = post.mv + (post.c12 / post.c11) * (u_out[j] - post.mu);
      double var = post.c22 - post.c12 * post.c12 / post.c11;
      v_out[j] = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
    }
  }
}

}  // namespace abcf
