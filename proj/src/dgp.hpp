#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace abcf {

// Calibrated simulation scenario. sigma_u/sigma_eps/sigma_v are natural-unit
// sds; sd targets shape the signal components; sd_y_target documents the
// emergent outcome scale the defaults were tuned to hit. residual_share_override
// in [0,1] re-solves (sigma_u, sigma_eps) so sigma_u^2 / (sigma_u^2 +
// sigma_eps^2/w_ref) equals the share while their total is held fixed.
struct DgpConfig {
  int n_units = 3000;
  int n_treated = 1000;
  int p = 5;
  double sd_y_target = 147.0;
  double sd_mu_target = 83.0;
  double sd_tau_target = 17.0;
  double sigma_u = 61.0;
  double sigma_eps = 2557.0;
  double sigma_v = 8.0;
  double rho = 0.0;                      // corr(u, v) when generating jointly
  double residual_share_override = -1.0; // < 0 means unset
  std::uint64_t seed = 0;
};

// Mean unit size of the reference design; the residual-share reallocation is
// defined against it so that the share axis is a fixed property of the
// scenario rather than of any one replicate's realized weights.
inline constexpr double kReferenceMeanW = 608.0;

struct Truth {
  std::vector<double> mu, tau, u, v;
  double satt = 0.0;
  double sigma_u = 0.0, sigma_v = 0.0, rho = 0.0;  // scenario scalars
};

struct Replicate {
  Dataset data;
  Truth truth;
};

// (sigma_u, sigma_eps) after applying any residual-share override.
void effective_sigmas(const DgpConfig& cfg, double* sigma_u, double* sigma_eps);

// Unit sizes: log-normal matched to median 437 and IQR (257, 768), resampled
// into [60, 3500], rounded to whole individuals.
std::vector<double> sample_unit_sizes(int n, Rng& rng);

// pi_j = Phi(1 - 2*[x1 > x2] + zeta_j), zeta ~ U(-0.05, 0.05); exactly
// n_treated units chosen by weighted sampling without replacement with
// inclusion weights pi_j. x is row-major n-by-p.
void assign_treatment(const std::vector<double>& x, int n, int p, int n_treated,
                      Rng& rng, std::vector<int>* z, std::vector<double>* pi);

// Assembles outcomes per the replicate identity
// y_j = mu_j + z_j tau_j + u_j + z_j v_j + eps_j, with mu/tau affinely
// rescaled within-replicate to their target sds (means preserved).
Replicate gen_outcomes(const std::vector<double>& x, const std::vector<int>& z,
                       const std::vector<double>& pi, const std::vector<double>& w,
                       const DgpConfig& cfg, Rng& rng);

// Full replicate from an independently derived per-replicate stream; any
// replicate is reproducible without generating its predecessors.
Replicate make_replicate(const DgpConfig& cfg, std::uint64_t replicate_index);

void write_truth(const Truth& truth, const std::vector<std::string>& unit_ids,
                 const std::string& path);
Truth load_truth(const std::string& path);

}  // namespace abcf
