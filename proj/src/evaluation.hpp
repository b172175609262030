#pragma once

#include <string>
#include <vector>

#include "dataset.hpp"
#include "dgp.hpp"
#include "fit.hpp"

namespace abcf {

// Long-format study results: one (replicate, model, estimand, metric) row.
struct MetricRow {
  int replicate_id = 0;
  std::string model;
  std::string estimand;  // satt | ute | sigma_u | sigma_v | rho | exemplar
  std::string metric;    // squared_error | rmse | width90 | covered90 | ...
  double value = 0.0;
};

struct UteSummary {
  double rmse = 0.0, width90 = 0.0, coverage90 = 0.0;
};

struct SattSummary {
  double estimate = 0.0, squared_error = 0.0, width90 = 0.0, covered90 = 0.0;
};

struct ExemplarSummary {
  double rmse = 0.0, width90 = 0.0, coverage90 = 0.0, top_quartile_precision = 0.0;
};

struct SigmaUSummary {
  double post_mean = 0.0, squared_error = 0.0, width90 = 0.0, covered90 = 0.0;
};

// Per-unit treatment-effect accuracy over the treated set. A unit's interval
// is the closed [q05, q95] of its effect draws (iBCF effects include the
// unit's v_j draw). Truth is tau_j + v_j by default; truth_includes_v=false
// scores against tau_j alone.
UteSummary ute_metrics(const PosteriorDraws& draws, const Truth& truth,
                       const Dataset& d, bool truth_includes_v = true);

// The w-weighted mean of effect draws over treated units, one value per
// retained draw; metrics on that posterior against the true SATT.
SattSummary satt_metrics(const PosteriorDraws& draws, const Truth& truth,
                         const Dataset& d);

// Ranking precision for high-performing units: fraction of the true top
// quartile (by u_j + v_j) recovered in the estimated top quartile. Bcf fits
// rank by the posterior residual y - mu - z*tau; the others by their drawn
// random effects.
ExemplarSummary exemplar_metrics(const PosteriorDraws& draws, const Truth& truth,
                                 const Dataset& d);

// Posterior accuracy for the random-effect scale. Throws UsageError on Bcf.
SigmaUSummary sigma_u_metrics(const PosteriorDraws& draws, double truth_sigma_u);

// All rows for one fitted replicate.
std::vector<MetricRow> evaluate_replicate(const PosteriorDraws& draws, const Truth& truth,
                                          const Dataset& d, const std::string& model_label,
                                          int replicate_id, bool ute_truth_includes_v = true);

// Paired model contrast for one metric across replicates. With two models the
// within-replicate fixed-effects regression collapses to the paired
// difference: gamma is mean(b - a), se its standard error, significance a
// two-sided t test at 0.05.
struct Comparison {
  std::string estimand, metric;
  double mean_a = 0.0, mean_b = 0.0;
  double gamma = 0.0, se = 0.0;
  bool significant = false;
  double pct_improvement = 0.0;  // 100 * (mean_a - mean_b) / mean_a
};

Comparison compare_models(const std::vector<MetricRow>& rows, const std::string& estimand,
                          const std::string& metric, const std::string& model_a,
                          const std::string& model_b);

// Comparisons for every (estimand, metric) both models share.
std::vector<Comparison> compare_all(const std::vector<MetricRow>& rows,
                                    const std::string& model_a, const std::string& model_b);

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);
std::vector<MetricRow> load_metrics_csv(const std::string& path);
void write_comparison_csv(const std::vector<Comparison>& comps, const std::string& model_a,
                          const std::string& model_b, const std::string& path);

}  // namespace abcf
