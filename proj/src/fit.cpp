#include "fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "random_effects.hpp"
#include "stats.hpp"

namespace abcf {

ForestData make_mu_forest_data(const Dataset& d, int n_cutpoints) {
  const int p = d.p() + 1;
  std::vector<double> x(static_cast<std::size_t>(d.n()) * p);
  for (int j = 0; j < d.n(); ++j) {
    auto row = d.x_row(j);
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::size_t>(j) * p);
    x[static_cast<std::size_t>(j) * p + d.p()] = d.pi()[j];
  }
  return ForestData::build(x.data(), d.n(), p, n_cutpoints);
}

ForestData make_tau_forest_data(const Dataset& d, int n_cutpoints) {
  std::vector<double> x(static_cast<std::size_t>(d.n()) * d.p());
  for (int j = 0; j < d.n(); ++j) {
    auto row = d.x_row(j);
    std::copy(row.begin(), row.end(), x.begin() + static_cast<std::size_t>(j) * d.p());
  }
  return ForestData::build(x.data(), d.n(), d.p(), n_cutpoints);
}

static void validate_config(const FitConfig& cfg) {
  if (cfg.n_burn <= 0 || cfg.n_draw <= 0)
    throw UsageError("fit: n_burn and n_draw must be positive");
  if (cfg.thinning <= 0) throw UsageError("fit: thinning must be positive");
  if (cfg.n_trees_mu <= 0 || cfg.n_trees_tau <= 0)
    throw UsageError("fit: ensemble sizes must be positive");
  if (cfg.n_cutpoints <= 0) throw UsageError("fit: n_cutpoints must be positive");
  if (cfg.sigma_u_prior_scale_multiplier <= 0.0)
    throw UsageError("fit: sigma_u prior multiplier must be positive");
  if (cfg.model_kind == ModelKind::Ibcf && cfg.psi <= 0.0)
    throw UsageError("fit: psi must be positive for the Ibcf model");
}

ForestState init_forests(const Dataset& d, const FitConfig& cfg) {
  validate_config(cfg);
  ForestState fs;
  TreePriorConfig mu_prior;  // alpha 0.95, beta 2
  TreePriorConfig tau_prior;
  tau_prior.alpha = 0.25;  // strong pull toward homogeneous effects
  tau_prior.beta = 3.0;
  // Reference calibration on the standardized outcome: the prognostic sum
  // spans roughly +-2 sd, the treatment sum about 0.674 sd (half the IQR of a
  // standard normal) before arm scaling.
  fs.mu.init(cfg.n_trees_mu, d.n(), 2.0 / std::sqrt(cfg.n_trees_mu), mu_prior);
  fs.tau.init(cfg.n_trees_tau, d.n(), 0.674 / std::sqrt(cfg.n_trees_tau),
              tau_prior);
  fs.b0 = -0.5;
  fs.b1 = 0.5;
  return fs;
}

void predict(const ForestState& s, const ForestData& mu_fd, const ForestData& tau_fd,
             std::span<const double> x, double pi, double* mu_out, double* tau_out) {
  if (static_cast<int>(x.size()) != tau_fd.p)
    throw UsageError("predict: covariate dimension mismatch");
  std::vector<double> mu_row(x.begin(), x.end());
  mu_row.push_back(pi);
  *mu_out = s.mu.evaluate(mu_fd, mu_row.data());
  *tau_out = (s.b1 - s.b0) * s.tau.evaluate(tau_fd, x.data());
}

// Residual variance of standardized y regressed on the covariates; the
// sampler's own sigma_eps^2 calibration and initialization.
static double standardized_ols_s2(const Dataset& d, const std::vector<double>& ys) {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(d.n()) * d.p());
  for (int j = 0; j < d.n(); ++j) {
    auto row = d.x_row(j);
    x.insert(x.end(), row.begin(), row.end());
  }
  return ols_residual_variance(ys, x, d.n(), d.p());
}

PosteriorDraws fit(const Dataset& d, const FitConfig& cfg) {
  validate_config(cfg);
  const int n = d.n();
  const ModelKind kind = cfg.model_kind;

  PosteriorDraws out;
  out.kind = kind;
  out.n_units = n;
  out.unit_ids = d.unit_ids();

  // Standardize the outcome by its weighted moments; everything below runs
  // on the standardized scale and is converted back at record time.
  const double yc = weighted_mean(d.y(), d.w());
  const double ysc = weighted_sd(d.y(), d.w());
  if (ysc <= 0.0) throw DataError("fit: constant outcome");
  out.y_center = yc;
  out.y_scale = ysc;
  std::vector<double> ys(n);
  for (int j = 0; j < n; ++j) ys[j] = (d.y()[j] - yc) / ysc;

  // Variance divisors, normalized by the mean weight so that constant
  // weights give divisor 1 and the model nests Bcf exactly; sigma_eps2 below
  // is therefore the unit-level variance at the mean weight.
  const double w_mean = mean(d.w());
  out.w_mean = w_mean;
  std::vector<double> div(n, 1.0);
  if (kind != ModelKind::Bcf) {
    for (int j = 0; j < n; ++j) div[j] = d.w()[j] / w_mean;
    if (d.constant_w())
      out.warnings.push_back(
          "unit sizes are constant: the random-effect scale is identified only "
          "by its prior");
  }

  ForestData mu_fd = make_mu_forest_data(d, cfg.n_cutpoints);
  ForestData tau_fd = make_tau_forest_data(d, cfg.n_cutpoints);
  ForestState fs = init_forests(d, cfg);

  PriorSpec priors;
  priors.nu = 3.0;
  const double s2_ols = standardized_ols_s2(d, ys);
  priors.lambda = s2_ols * chi_squared_quantile(0.10, priors.nu) / priors.nu;
  priors.s_u = (2.0 / 3.0) * cfg.sigma_u_prior_scale_multiplier;
  priors.psi = cfg.psi;

  VarianceState vs;
  vs.sigma_eps2 = s2_ols;
  const bool pin_u = !std::isnan(cfg.pin_sigma_u);
  const bool pin_v = !std::isnan(cfg.pin_sigma_v);
  const bool pin_rho = !std::isnan(cfg.pin_rho);
  if (kind == ModelKind::Bcf) {
    vs.sigma_u = vs.sigma_v = vs.rho = 0.0;
  } else {
    vs.sigma_u = pin_u ? cfg.pin_sigma_u : priors.s_u / 2.0;
    if (kind == ModelKind::Ibcf) {
      double s_v0 = structured_sigma_v_scale(vs.sigma_u, priors.psi, ysc * ysc);
      vs.sigma_v = pin_v ? cfg.pin_sigma_v : 0.5 * s_v0;
      vs.rho = pin_rho ? cfg.pin_rho : 0.0;
    } else {
      vs.sigma_v = vs.rho = 0.0;
    }
  }
  // Starting proposal sds on the working (log / atanh) scales; burn-in
  // adaptation walks them toward the 44% target from here.
  vs.adapt_for(VarParam::SigmaEps2).proposal_sd = 0.3;
  vs.adapt_for(VarParam::SigmaU).proposal_sd = 0.5;
  vs.adapt_for(VarParam::SigmaV).proposal_sd = 0.6;
  vs.adapt_for(VarParam::Rho).proposal_sd = 0.6;
  if (!std::isnan(cfg.initial_proposal_sd))
    for (auto& ad : vs.adapt) ad.proposal_sd = cfg.initial_proposal_sd;

  const bool mh_u = kind != ModelKind::Bcf && !pin_u;
  const bool mh_v = kind == ModelKind::Ibcf && !pin_v;
  const bool mh_rho = kind == ModelKind::Ibcf && !pin_rho;

  Rng rng(cfg.seed);
  std::vector<double> lam(n), num(n), a_mu(n, 1.0), a_tau(n), r(n), u_buf(n), v_buf(n);
  std::vector<double> num_arm, g_arm, lam_arm;
  const int total_iters = cfg.n_burn + cfg.n_draw;
  const int n_kept_target = cfg.n_draw / cfg.thinning;
  out.n_kept = 0;
  out.sigma_eps.reserve(n_kept_target);
  out.mu.reserve(static_cast<std::size_t>(n_kept_target) * n);
  out.tau.reserve(static_cast<std::size_t>(n_kept_target) * n);
  out.u.reserve(static_cast<std::size_t>(n_kept_target) * n);
  if (kind == ModelKind::Ibcf) out.v.reserve(static_cast<std::size_t>(n_kept_target) * n);

  for (int iter = 0; iter < total_iters; ++iter) {
    const bool burn = iter < cfg.n_burn;

    for (int j = 0; j < n; ++j) {
      double s2;
      if (!try_sigma_j_squared(vs, div[j], d.z()[j], kind, &s2)) {
        std::ostringstream msg;
        msg << "fit: nonpositive compound variance at iteration " << iter;
        throw NumericError(msg.str());
      }
      lam[j] = 1.0 / s2;
    }

    // Prognostic forest against y minus the arm-scaled treatment fit.
    for (int j = 0; j < n; ++j)
      num[j] = ys[j] - (d.z()[j] ? fs.b1 : fs.b0) * fs.tau.total[j];
    update_forest(fs.mu, mu_fd, num, a_mu, lam, rng);

    // Treatment forest: y minus mu, with per-arm coefficients b_z.
    for (int j = 0; j < n; ++j) {
      num[j] = ys[j] - fs.mu.total[j];
      a_tau[j] = d.z()[j] ? fs.b1 : fs.b0;
    }
    update_forest(fs.tau, tau_fd, num, a_tau, lam, rng);

    // Arm scales, conjugate given the raw treatment fits (num still y - mu).
    {
      for (int arm = 0; arm <= 1; ++arm) {
        num_arm.clear();
        g_arm.clear();
        lam_arm.clear();
        for (int j = 0; j < n; ++j) {
          if (d.z()[j] != arm) continue;
          num_arm.push_back(num[j]);
          g_arm.push_back(fs.tau.total[j]);
          lam_arm.push_back(lam[j]);
        }
        double bm, bv;
        b_conditional(num_arm, g_arm, lam_arm, 0.5, &bm, &bv);
        double draw = bm + std::sqrt(bv) * rng.normal();
        (arm == 0 ? fs.b0 : fs.b1) = draw;
      }
    }

    // Variance parameters on the marginal residuals.
    for (int j = 0; j < n; ++j)
      r[j] = ys[j] - fs.mu.total[j] - (d.z()[j] ? fs.b1 : fs.b0) * fs.tau.total[j];
    mh_update(VarParam::SigmaEps2, vs, priors, r, div, d.z(), kind, rng);
    if (mh_u) mh_update(VarParam::SigmaU, vs, priors, r, div, d.z(), kind, rng);
    if (kind == ModelKind::Ibcf) {
      // The structured sigma_v prior tracks the current sigma_u draw.
      priors.s_v = structured_sigma_v_scale(vs.sigma_u, priors.psi, ysc * ysc);
      if (mh_v) mh_update(VarParam::SigmaV, vs, priors, r, div, d.z(), kind, rng);
      if (mh_rho) mh_update(VarParam::Rho, vs, priors, r, div, d.z(), kind, rng);
    }

    if (burn && !cfg.disable_adaptation && (iter + 1) % 100 == 0) adapt_proposals(vs);
    if (iter == cfg.n_burn - 1)
      for (auto& ad : vs.adapt) ad.accept_count = ad.attempt_count = 0;

    if (!std::isfinite(vs.sigma_eps2) || !std::isfinite(fs.b0) || !std::isfinite(fs.b1)) {
      std::ostringstream msg;
      msg << "fit: non-finite sampler state at iteration " << iter;
      throw NumericError(msg.str());
    }

    if (!burn && (iter - cfg.n_burn + 1) % cfg.thinning == 0) {
      // Post-hoc random effects at the current state, then record in natural
      // units.
      if (kind == ModelKind::Bcf) {
        std::fill(u_buf.begin(), u_buf.end(), 0.0);
      } else if (kind == ModelKind::Abcf) {
        draw_u(r, vs, div, rng, u_buf);
      } else {
        draw_uv(r, vs, div, d.z(), rng, u_buf, v_buf);
      }
      double eps_scale = kind == ModelKind::Bcf ? 1.0 : std::sqrt(w_mean);
      out.sigma_eps.push_back(std::sqrt(vs.sigma_eps2) * eps_scale * ysc);
      if (kind != ModelKind::Bcf) out.sigma_u.push_back(vs.sigma_u * ysc);
      if (kind == ModelKind::Ibcf) {
        out.sigma_v.push_back(vs.sigma_v * ysc);
        out.rho.push_back(vs.rho);
      }
      out.b0.push_back(fs.b0);
      out.b1.push_back(fs.b1);
      for (int j = 0; j < n; ++j) {
        out.mu.push_back((fs.mu.total[j] + fs.b0 * fs.tau.total[j]) * ysc + yc);
        out.tau.push_back((fs.b1 - fs.b0) * fs.tau.total[j] * ysc);
        if (kind != ModelKind::Bcf) out.u.push_back(u_buf[j] * ysc);
      }
      if (kind == ModelKind::Ibcf)
        for (int j = 0; j < n; ++j) out.v.push_back(v_buf[j] * ysc);
      out.n_kept += 1;
    }
  }

  auto push_diag = [&](const char* name, VarParam p) {
    const ParamAdapt& ad = vs.adapt_for(p);
    MhDiagnostic diag;
    diag.name = name;
    diag.proposal_sd = ad.proposal_sd;
    diag.attempts = ad.attempt_count;
    diag.accepts = ad.accept_count;
    out.diagnostics.push_back(diag);
  };
  push_diag("sigma_eps2", VarParam::SigmaEps2);
  if (mh_u) push_diag("sigma_u", VarParam::SigmaU);
  if (mh_v) push_diag("sigma_v", VarParam::SigmaV);
  if (mh_rho) push_diag("rho", VarParam::Rho);
  out.forest_accept_mu = fs.mu.move_attempts
                             ? static_cast<double>(fs.mu.move_accepts) / fs.mu.move_attempts
                             : 0.0;
  out.forest_accept_tau = fs.tau.move_attempts
                              ? static_cast<double>(fs.tau.move_accepts) / fs.tau.move_attempts
                              : 0.0;
  return out;
}

FitReport fit_report(const PosteriorDraws& draws) {
  if (draws.n_kept == 0) throw UsageError("fit_report: no retained draws to report on");
  FitReport rep;
  rep.diagnostics = draws.diagnostics;
  rep.warnings = draws.warnings;
  rep.forest_accept_mu = draws.forest_accept_mu;
  rep.forest_accept_tau = draws.forest_accept_tau;
  for (const auto& diag : rep.diagnostics) {
    double rate = diag.acceptance_rate();
    if (rate < 0.2 || rate > 0.7) rep.flagged.push_back(diag.name);
  }
  return rep;
}

}  // namespace abcf
