#include "dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csv.hpp"
#include "errors.hpp"
#include "stats.hpp"

namespace abcf {

void effective_sigmas(const DgpConfig& cfg, double* sigma_u, double* sigma_eps) {
  *sigma_u = cfg.sigma_u;
  *sigma_eps = cfg.sigma_eps;
  if (cfg.residual_share_override < 0.0) return;
  double share = cfg.residual_share_override;
  if (share > 1.0) throw UsageError("residual share must be in [0, 1]");
  // Total unit-level residual variance at the reference design, reallocated
  // between the random-effect and averaged-noise components.
  double total = cfg.sigma_u * cfg.sigma_u +
                 cfg.sigma_eps * cfg.sigma_eps / kReferenceMeanW;
  *sigma_u = std::sqrt(share * total);
  *sigma_eps = std::sqrt((1.0 - share) * total * kReferenceMeanW);
}

std::vector<double> sample_unit_sizes(int n, Rng& rng) {
  if (n < 1) throw UsageError("sample_unit_sizes: n must be >= 1");
  // Median 437 pins the log-mean; the IQR pins the log-sd via the normal
  // quartile 0.6744898.
  const double mu_log = std::log(437.0);
  const double sd_log = (std::log(768.0) - std::log(257.0)) / (2.0 * 0.674489750196082);
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) {
    double v;
    do {
      v = std::exp(mu_log + sd_log * rng.normal());
    } while (v < 60.0 || v > 3500.0);
    w[j] = std::round(v);
  }
  return w;
}

void assign_treatment(const std::vector<double>& x, int n, int p, int n_treated,
                      Rng& rng, std::vector<int>* z, std::vector<double>* pi) {
  if (n_treated < 1 || n_treated >= n)
    throw UsageError("assign_treatment: need 1 <= n_treated < n");
  pi->resize(n);
  for (int j = 0; j < n; ++j) {
    double zeta = -0.05 + 0.1 * rng.uniform();
    double ind = x[static_cast<std::size_t>(j) * p] > x[static_cast<std::size_t>(j) * p + 1]
                     ? 1.0
                     : 0.0;
    (*pi)[j] = normal_cdf(1.0 - 2.0 * ind + zeta);
  }
  // Weighted sampling without replacement via the exponential race: the
  // n_treated smallest Exp(1)/pi_j keys are selected, so inclusion follows
  // successive sampling with probabilities proportional to pi.
  std::vector<std::pair<double, int>> keys(n);
  for (int j = 0; j < n; ++j) keys[j] = {rng.exponential() / (*pi)[j], j};
  std::sort(keys.begin(), keys.end());
  z->assign(n, 0);
  for (int k = 0; k < n_treated; ++k) (*z)[keys[k].second] = 1;
}

static void rescale_to_sd(std::vector<double>* vals, double target_sd,
                          const char* what) {
  double m = mean(*vals);
  double sd = sample_sd(*vals);
  if (sd <= 0.0)
    throw DataError(std::string("gen_outcomes: degenerate ") + what +
                    " (zero spread before rescaling)");
  double scale = target_sd / sd;
  for (double& v : *vals) v = m + (v - m) * scale;
}

Replicate gen_outcomes(const std::vector<double>& x, const std::vector<int>& z,
                       const std::vector<double>& pi, const std::vector<double>& w,
                       const DgpConfig& cfg, Rng& rng) {
  const int n = static_cast<int>(z.size());
  const int p = cfg.p;
  if (p < 5) throw UsageError("gen_outcomes: the outcome functions use five covariates");
  double sigma_u, sigma_eps;
  effective_sigmas(cfg, &sigma_u, &sigma_eps);

  Truth truth;
  truth.mu.resize(n);
  truth.tau.resize(n);
  truth.u.resize(n);
  truth.v.resize(n);
  truth.sigma_u = sigma_u;
  truth.sigma_v = cfg.sigma_v;
  truth.rho = cfg.rho;

  for (int j = 0; j < n; ++j) {
    const double* row = x.data() + static_cast<std::size_t>(j) * p;
    truth.mu[j] = 6.0 - 12.0 * (row[1] > 0.0 ? 1.0 : 0.0) + std::abs(row[0] - 1.0) +
                  3.0 * row[4];
    truth.tau[j] = 1.0 + row[2] + 0.75 * row[3];
  }
  rescale_to_sd(&truth.mu, cfg.sd_mu_target, "mu");
  rescale_to_sd(&truth.tau, cfg.sd_tau_target, "tau");

  // Random effects first (fixed 2n normal consumption regardless of rho),
  // then the averaged noise.
  for (int j = 0; j < n; ++j) {
    double n1 = rng.normal(), n2 = rng.normal();
    truth.u[j] = sigma_u * n1;
    truth.v[j] = cfg.sigma_v * (cfg.rho * n1 + std::sqrt(1.0 - cfg.rho * cfg.rho) * n2);
  }

  std::vector<AggregateUnit> units(n);
  for (int j = 0; j < n; ++j) {
    double eps = sigma_eps / std::sqrt(w[j]) * rng.normal();
    AggregateUnit& u = units[j];
    u.unit_id = std::to_string(j + 1);
    u.z = z[j];
    u.w = w[j];
    u.pi = pi[j];
    u.x.assign(x.begin() + static_cast<std::size_t>(j) * p,
               x.begin() + static_cast<std::size_t>(j + 1) * p);
    u.y = truth.mu[j] + z[j] * truth.tau[j] + truth.u[j] + z[j] * truth.v[j] + eps;
  }

  double num = 0.0, den = 0.0;
  for (int j = 0; j < n; ++j) {
    if (!z[j]) continue;
    num += w[j] * (truth.tau[j] + truth.v[j]);
    den += w[j];
  }
  truth.satt = num / den;

  Replicate rep{Dataset::create(std::move(units)), std::move(truth)};
  return rep;
}

Replicate make_replicate(const DgpConfig& cfg, std::uint64_t replicate_index) {
  if (cfg.n_units < 2) throw UsageError("make_replicate: need at least 2 units");
  Rng rng(cfg.seed, replicate_index);
  const int n = cfg.n_units, p = cfg.p;
  std::vector<double> x(static_cast<std::size_t>(n) * p);
  for (double& v : x) v = rng.normal();
  std::vector<double> w = sample_unit_sizes(n, rng);
  std::vector<int> z;
  std::vector<double> pi;
  assign_treatment(x, n, p, cfg.n_treated, rng, &z, &pi);
  return gen_outcomes(x, z, pi, w, cfg, rng);
}

void write_truth(const Truth& truth, const std::vector<std::string>& unit_ids,
                 const std::string& path) {
  CsvTable t;
  t.header = {"unit_id", "mu", "tau", "u", "v", "satt", "sigma_u", "sigma_v", "rho"};
  for (std::size_t j = 0; j < unit_ids.size(); ++j) {
    t.rows.push_back({unit_ids[j], format_double(truth.mu[j]), format_double(truth.tau[j]),
                      format_double(truth.u[j]), format_double(truth.v[j]),
                      format_double(truth.satt), format_double(truth.sigma_u),
                      format_double(truth.sigma_v), format_double(truth.rho)});
  }
  write_csv(path, t);
}

Truth load_truth(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_mu = t.require_column("mu"), c_tau = t.require_column("tau");
  int c_u = t.require_column("u"), c_v = t.require_column("v");
  int c_satt = t.require_column("satt");
  int c_su = t.column("sigma_u"), c_sv = t.column("sigma_v"), c_rho = t.column("rho");
  Truth truth;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string ctx = path + " row " + std::to_string(i + 2);
    truth.mu.push_back(parse_double(row[c_mu], ctx));
    truth.tau.push_back(parse_double(row[c_tau], ctx));
    truth.u.push_back(parse_double(row[c_u], ctx));
    truth.v.push_back(parse_double(row[c_v], ctx));
    truth.satt = parse_double(row[c_satt], ctx);
    if (c_su >= 0) truth.sigma_u = parse_double(row[c_su], ctx);
    if (c_sv >= 0) truth.sigma_v = parse_double(row[c_sv], ctx);
    if (c_rho >= 0) truth.rho = parse_double(row[c_rho], ctx);
  }
  if (truth.mu.empty()) throw DataError(path + ": empty truth file");
  return truth;
}

}  // namespace abcf
