#include "variance.hpp"

#include <cmath>
#include <limits>

#include "dataset.hpp"
#include "errors.hpp"
#include "stats.hpp"

namespace abcf {

static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Bcf: return "bcf";
    case ModelKind::Abcf: return "abcf";
    default: return "ibcf";
  }
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "bcf") return ModelKind::Bcf;
  if (name == "abcf") return ModelKind::Abcf;
  if (name == "ibcf") return ModelKind::Ibcf;
  throw UsageError("unknown model '" + name + "' (expected bcf, abcf, or ibcf)");
}

bool try_sigma_j_squared(const VarianceState& vs, double w, int z, ModelKind kind,
                         double* out) {
  double s2;
  switch (kind) {
    case ModelKind::Bcf:
      s2 = vs.sigma_eps2;
      break;
    case ModelKind::Abcf:
      s2 = vs.sigma_eps2 / w + vs.sigma_u * vs.sigma_u;
      break;
    default:
      s2 = vs.sigma_eps2 / w + vs.sigma_u * vs.sigma_u +
           z * (vs.sigma_v * vs.sigma_v + 2.0 * vs.rho * vs.sigma_u * vs.sigma_v);
      break;
  }
  *out = s2;
  return s2 > 0.0;
}

double sigma_j_squared(const VarianceState& vs, double w, int z, ModelKind kind) {
  if (w <= 0.0) throw DataError("sigma_j_squared: w must be positive");
  double s2;
  if (!try_sigma_j_squared(vs, w, z, kind, &s2))
    throw NumericError("sigma_j_squared: nonpositive compound variance");
  return s2;
}

void calibrate_sigma_eps_prior(const Dataset& d, double* nu, double* lambda) {
  if (d.n() <= d.p() + 1)
    throw DataError("calibrate_sigma_eps_prior: need n > p + 1");
  const double q = 0.90;
  *nu = 3.0;
  // Standardize y by its weighted moments, regress on the covariates.
  double yc = weighted_mean(d.y(), d.w());
  double ys = weighted_sd(d.y(), d.w());
  if (ys <= 0.0) throw DataError("calibrate_sigma_eps_prior: constant outcome");
  std::vector<double> y_std(d.n());
  for (int j = 0; j < d.n(); ++j) y_std[j] = (d.y()[j] - yc) / ys;
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(d.n()) * d.p());
  for (int j = 0; j < d.n(); ++j) {
    auto row = d.x_row(j);
    x.insert(x.end(), row.begin(), row.end());
  }
  double s2 = ols_residual_variance(y_std, x, d.n(), d.p());
  // InverseGamma(nu/2, nu*l/2) has P(X <= s2) = q exactly when
  // nu*l / s2 equals the chi-squared(nu) quantile at 1-q.
  double l0 = s2 * chi_squared_quantile(1.0 - q, *nu) / *nu;
  *lambda = l0 * mean(d.w());
}

double default_sigma_u_prior(const Dataset& d) {
  double s = weighted_sd(d.y(), d.w());
  if (s <= 0.0) throw DataError("default_sigma_u_prior: constant outcome gives a degenerate prior");
  return (2.0 / 3.0) * s;
}

double structured_sigma_v_scale(double sigma_u, double psi, double var_y) {
  if (var_y <= 0.0) throw DataError("structured_sigma_v_scale: var_y must be positive");
  return sigma_u * psi / std::sqrt(var_y);
}

static double log_prior_kernel(VarParam param, double value, const PriorSpec& priors) {
  switch (param) {
    case VarParam::SigmaEps2:
      if (value <= 0.0) return kNegInf;
      return -(priors.nu / 2.0 + 1.0) * std::log(value) -
             priors.nu * priors.lambda / (2.0 * value);
    case VarParam::SigmaU:
      if (value < 0.0) return kNegInf;
      return -value * value / (2.0 * priors.s_u * priors.s_u);
    case VarParam::SigmaV:
      if (value < 0.0) return kNegInf;
      if (priors.s_v <= 0.0) return value == 0.0 ? 0.0 : kNegInf;
      return -value * value / (2.0 * priors.s_v * priors.s_v);
    default:  // rho, recentered Beta(2,2) on (-1,1)
      if (value <= -1.0 || value >= 1.0) return kNegInf;
      return std::log1p(value) + std::log1p(-value);
  }
}

double log_conditional(VarParam param, double value, const VarianceState& vs,
                       const PriorSpec& priors, std::span<const double> r,
                       std::span<const double> w, std::span<const int> z,
                       ModelKind kind) {
  double lp = log_prior_kernel(param, value, priors);
  if (lp == kNegInf) return kNegInf;
  VarianceState cand = vs;
  switch (param) {
    case VarParam::SigmaEps2: cand.sigma_eps2 = value; break;
    case VarParam::SigmaU: cand.sigma_u = value; break;
    case VarParam::SigmaV: cand.sigma_v = value; break;
    default: cand.rho = value; break;
  }
  double ll = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    double s2;
    if (!try_sigma_j_squared(cand, w[j], z[j], kind, &s2)) return kNegInf;
    ll += -0.5 * std::log(s2) - r[j] * r[j] / (2.0 * s2);
  }
  return lp + ll;
}

static double current_value(VarParam param, const VarianceState& vs) {
  switch (param) {
    case VarParam::SigmaEps2: return vs.sigma_eps2;
    case VarParam::SigmaU: return vs.sigma_u;
    case VarParam::SigmaV: return vs.sigma_v;
    default: return vs.rho;
  }
}

static void set_value(VarParam param, VarianceState& vs, double value) {
  switch (param) {
    case VarParam::SigmaEps2: vs.sigma_eps2 = value; break;
    case VarParam::SigmaU: vs.sigma_u = value; break;
    case VarParam::SigmaV: vs.sigma_v = value; break;
    default: vs.rho = value; break;
  }
}

void mh_update(VarParam param, VarianceState& vs, const PriorSpec& priors,
               std::span<const double> r, std::span<const double> w,
               std::span<const int> z, ModelKind kind, Rng& rng) {
  ParamAdapt& ad = vs.adapt_for(param);
  ad.attempt_count += 1;
  const double cur = current_value(param, vs);
  double cand, log_jac;
  if (param == VarParam::Rho) {
    // Random walk on atanh(rho); d rho / d theta = 1 - rho^2.
    double theta = std::atanh(cur) + ad.proposal_sd * rng.normal();
    cand = std::tanh(theta);
    log_jac = std::log1p(-cand * cand) - std::log1p(-cur * cur);
  } else {
    // Random walk on the log scale; d value / d theta = value.
    double theta = std::log(cur) + ad.proposal_sd * rng.normal();
    cand = std::exp(theta);
    log_jac = std::log(cand) - std::log(cur);
  }
  double lc_cur = log_conditional(param, cur, vs, priors, r, w, z, kind);
  double lc_cand = log_conditional(param, cand, vs, priors, r, w, z, kind);
  if (lc_cand == kNegInf) return;
  double log_accept = lc_cand - lc_cur + log_jac;
  bool accept = lc_cur == kNegInf || std::log(rng.uniform_pos()) < log_accept;
  if (accept) {
    set_value(param, vs, cand);
    ad.accept_count += 1;
  }
}

void adapt_proposals(VarianceState& vs) {
  for (auto& ad : vs.adapt) {
    if (ad.attempt_count > 0) {
      double rate = static_cast<double>(ad.accept_count) /
                    static_cast<double>(ad.attempt_count);
      ad.proposal_sd *= std::exp(rate > 0.44 ? 0.1 : -0.1);
    }
    ad.accept_count = ad.attempt_count = 0;
  }
}

}  // namespace abcf
