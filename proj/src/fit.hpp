#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "forest.hpp"
#include "variance.hpp"

namespace abcf {

struct FitConfig {
  ModelKind model_kind = ModelKind::Abcf;
  int n_burn = 1000;
  int n_draw = 1000;
  int thinning = 1;
  int n_trees_mu = 200;
  int n_trees_tau = 50;
  double sigma_u_prior_scale_multiplier = 1.0;
  double psi = 25.0;  // superpopulation ATE scale (iBCF structured prior)
  std::uint64_t seed = 0;
  int n_cutpoints = 100;

  // Diagnostics and nesting-test hooks. A pinned parameter is fixed at the
  // given value and skipped by the MH sweep (NaN = free).
  double pin_sigma_u = std::nan("");
  double pin_sigma_v = std::nan("");
  double pin_rho = std::nan("");
  bool disable_adaptation = false;
  double initial_proposal_sd = std::nan("");  // override for every parameter
};

struct MhDiagnostic {
  std::string name;           // sigma_eps2 | sigma_u | sigma_v | rho
  double proposal_sd = 0.0;   // final (post-adaptation) value
  long attempts = 0, accepts = 0;  // post-burn-in window
  double acceptance_rate() const {
    return attempts > 0 ? static_cast<double>(accepts) / static_cast<double>(attempts)
                        : 0.0;
  }
};

// Retained draws in natural (un-standardized) units. Per-unit matrices are
// draw-major: value(d, j) = data[d * n_units + j].
struct PosteriorDraws {
  ModelKind kind = ModelKind::Abcf;
  int n_units = 0;
  int n_kept = 0;
  std::vector<std::string> unit_ids;
  std::vector<double> sigma_eps, sigma_u, sigma_v, rho, b0, b1;  // per draw
  std::vector<double> mu, tau, u, v;  // v empty unless Ibcf
  std::vector<MhDiagnostic> diagnostics;
  std::vector<std::string> warnings;
  double y_center = 0.0, y_scale = 1.0, w_mean = 1.0;
  double forest_accept_mu = 0.0, forest_accept_tau = 0.0;

  double unit_value(const std::vector<double>& m, int draw, int j) const {
    return m[static_cast<std::size_t>(draw) * n_units + j];
  }
};

// One full MCMC fit. Deterministic given (dataset, config): per iteration the
// sweep computes compound variances, backfits the prognostic then treatment
// forest, redraws the arm scales b0/b1, Metropolis-updates the free variance
// parameters in the fixed order sigma_eps^2, sigma_u, sigma_v, rho, adapts
// proposals every 100 burn-in iterations, and in the sampling phase draws the
// random effects post hoc and records every `thinning`-th iteration.
PosteriorDraws fit(const Dataset& d, const FitConfig& cfg);

struct FitReport {
  std::vector<MhDiagnostic> diagnostics;
  std::vector<std::string> flagged;  // parameters with post-burn rate outside [0.2, 0.7]
  double forest_accept_mu = 0.0, forest_accept_tau = 0.0;
  std::vector<std::string> warnings;
};

// Post-fit acceptance-rate summary; throws UsageError when no draws were kept.
FitReport fit_report(const PosteriorDraws& draws);

// The two ensembles plus the treatment-arm scales; one chain's forest state.
struct ForestState {
  Forest mu, tau;
  double b0 = -0.5, b1 = 0.5;
};

// Stumps-with-zero-leaves initial state sized per the config.
ForestState init_forests(const Dataset& d, const FitConfig& cfg);

// Walk every tree at a new point: mu is the raw prognostic-ensemble sum at
// (x, pi); tau is the arm-contrast-scaled treatment-ensemble sum (b1 - b0)
// times the raw sum at x. Throws UsageError on dimension mismatch.
void predict(const ForestState& s, const ForestData& mu_fd, const ForestData& tau_fd,
             std::span<const double> x, double pi, double* mu_out, double* tau_out);

// Design matrices the ensembles split on: the prognostic forest sees
// [x | pi], the treatment forest x alone.
ForestData make_mu_forest_data(const Dataset& d, int n_cutpoints);
ForestData make_tau_forest_data(const Dataset& d, int n_cutpoints);

}  // namespace abcf
