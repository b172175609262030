#pragma once

#include <span>
#include <string>

#include "rng.hpp"

namespace abcf {

class Dataset;

// Bcf: constant variance, no random effects. Abcf: sigma_eps^2/w_j + u_j.
// Ibcf: adds random treatment effects v_j with correlation rho.
enum class ModelKind { Bcf, Abcf, Ibcf };

const char* model_kind_name(ModelKind kind);            // "bcf" | "abcf" | "ibcf"
ModelKind parse_model_kind(const std::string& name);    // UsageError on anything else

enum class VarParam { SigmaEps2 = 0, SigmaU = 1, SigmaV = 2, Rho = 3 };
inline constexpr int kNumVarParams = 4;

struct ParamAdapt {
  double proposal_sd = 0.5;
  long accept_count = 0, attempt_count = 0;
};

struct VarianceState {
  double sigma_eps2 = 1.0;  // individual-level error variance
  double sigma_u = 0.0;
  double sigma_v = 0.0;
  double rho = 0.0;
  ParamAdapt adapt[kNumVarParams];

  ParamAdapt& adapt_for(VarParam p) { return adapt[static_cast<int>(p)]; }
  const ParamAdapt& adapt_for(VarParam p) const { return adapt[static_cast<int>(p)]; }
};

struct PriorSpec {
  double nu = 3.0;      // sigma_eps^2 ~ InverseGamma(nu/2, nu*lambda/2)
  double lambda = 1.0;
  double s_u = 1.0;     // half-normal scale for sigma_u
  double s_v = 1.0;     // half-normal scale for sigma_v (structured, updated per iteration)
  double psi = 25.0;    // superpopulation ATE scale feeding s_v
};

// Marginal variance of one unit's residual. Bcf ignores w; Abcf adds the
// random-effect variance to sigma_eps^2/w; Ibcf adds the treated-arm terms.
// Throws NumericError when the Ibcf form goes nonpositive (callers inside MH
// use the try_ variant and treat that as zero likelihood).
double sigma_j_squared(const VarianceState& vs, double w, int z, ModelKind kind);
bool try_sigma_j_squared(const VarianceState& vs, double w, int z, ModelKind kind,
                         double* out);

// (nu=3, lambda) such that the inverse-gamma prior for sigma_eps^2 / w_mean
// puts its 0.90 quantile at the OLS residual variance of standardized y on x;
// lambda is returned on the sigma_eps^2 scale (multiplied by w_mean).
void calibrate_sigma_eps_prior(const Dataset& d, double* nu, double* lambda);

// Half-normal scale (2/3) * weighted sd of y. Throws DataError when zero.
double default_sigma_u_prior(const Dataset& d);

// Structured prior scale s_v = sigma_u * psi / sd(y); tracks sigma_u as the
// chain moves.
double structured_sigma_v_scale(double sigma_u, double psi, double var_y);

// Log posterior conditional (up to a constant) for one variance parameter at
// a candidate value, holding the others at their current values. r_j are the
// residuals y_j - f(x_j); w_j the variance divisors. Out-of-support values
// give -infinity.
double log_conditional(VarParam param, double value, const VarianceState& vs,
                       const PriorSpec& priors, std::span<const double> r,
                       std::span<const double> w, std::span<const int> z,
                       ModelKind kind);

// One adaptive random-walk Metropolis step on the parameter's working scale
// (log for the sds/variance, atanh for rho), Jacobian-corrected. Updates the
// parameter in place and its acceptance counters.
void mh_update(VarParam param, VarianceState& vs, const PriorSpec& priors,
               std::span<const double> r, std::span<const double> w,
               std::span<const int> z, ModelKind kind, Rng& rng);

// Burn-in proposal tuning toward a 0.44 acceptance rate: each parameter's
// proposal sd is multiplied by exp(+0.1) when the window ran hot, exp(-0.1)
// when cold; counters reset. Call every 100 burn-in iterations only.
void adapt_proposals(VarianceState& vs);

}  // namespace abcf
