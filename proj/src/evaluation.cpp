#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "errors.hpp"
#include "stats.hpp"

namespace abcf {

namespace {

// Column k-major draw matrices: value for draw k, unit j.
inline double at(const std::vector<double>& m, int n_units, int k, int j) {
  return m[static_cast<std::size_t>(k) * n_units + j];
}

// Effect draw for one unit: tau, plus the unit's v draw when the model has one.
inline double effect_draw(const PosteriorDraws& dr, int k, int j) {
  double e = at(dr.tau, dr.n_units, k, j);
  if (dr.kind == ModelKind::Ibcf && !dr.v.empty()) e += at(dr.v, dr.n_units, k, j);
  return e;
}

struct IntervalStats {
  double post_mean, lo, hi;
};

IntervalStats summarize_column(const std::vector<double>& col) {
  static const double ps[] = {0.05, 0.95};
  IntervalStats s{};
  s.post_mean = mean(col);
  std::vector<double> qs = quantiles(col, ps);
  s.lo = qs[0];
  s.hi = qs[1];
  return s;
}

void check_draws(const PosteriorDraws& dr, const Dataset& d) {
  if (dr.n_kept < 1) throw UsageError("posterior holds no retained draws");
  if (dr.n_units != d.n()) throw UsageError("posterior and dataset unit counts differ");
}

void check_truth(const Truth& truth, const Dataset& d) {
  if (static_cast<int>(truth.tau.size()) != d.n())
    throw UsageError("truth and dataset unit counts differ");
}

}  // namespace

UteSummary ute_metrics(const PosteriorDraws& dr, const Truth& truth, const Dataset& d,
                       bool truth_includes_v) {
  check_draws(dr, d);
  check_truth(truth, d);
  double sse = 0.0, wsum = 0.0, csum = 0.0;
  int n_treated = 0;
  std::vector<double> col(dr.n_kept);
  for (int j = 0; j < d.n(); ++j) {
    if (d.z()[j] != 1) continue;
    ++n_treated;
    for (int k = 0; k < dr.n_kept; ++k) col[k] = effect_draw(dr, k, j);
    const IntervalStats s = summarize_column(col);
    double target = truth.tau[j];
    if (truth_includes_v) target += truth.v[j];
    sse += (s.post_mean - target) * (s.post_mean - target);
    wsum += s.hi - s.lo;
    csum += (s.lo <= target && target <= s.hi) ? 1.0 : 0.0;
  }
  if (n_treated == 0) throw UsageError("no treated units to score");
  UteSummary out;
  out.rmse = std::sqrt(sse / n_treated);
  out.width90 = wsum / n_treated;
  out.coverage90 = csum / n_treated;
  return out;
}

SattSummary satt_metrics(const PosteriorDraws& dr, const Truth& truth, const Dataset& d) {
  check_draws(dr, d);
  check_truth(truth, d);
  std::vector<double> satt_draws(dr.n_kept, 0.0);
  double wtot = 0.0;
  for (int j = 0; j < d.n(); ++j)
    if (d.z()[j] == 1) wtot += d.w()[j];
  if (wtot <= 0.0) throw UsageError("no treated units to score");
  for (int k = 0; k < dr.n_kept; ++k) {
    double acc = 0.0;
    for (int j = 0; j < d.n(); ++j)
      if (d.z()[j] == 1) acc += d.w()[j] * effect_draw(dr, k, j);
    satt_draws[k] = acc / wtot;
  }
  const IntervalStats s = summarize_column(satt_draws);
  SattSummary out;
  out.estimate = s.post_mean;
  out.squared_error = (s.post_mean - truth.satt) * (s.post_mean - truth.satt);
  out.width90 = s.hi - s.lo;
  out.covered90 = (s.lo <= truth.satt && truth.satt <= s.hi) ? 1.0 : 0.0;
  return out;
}

ExemplarSummary exemplar_metrics(const PosteriorDraws& dr, const Truth& truth,
                                 const Dataset& d) {
  check_draws(dr, d);
  check_truth(truth, d);
  const int n = d.n();
  if (n < 4) throw UsageError("exemplar ranking needs at least four units");

  // Per-unit estimate draws of the persistent unit effect u_j (+ v_j where the
  // model draws one). Bcf has no such block, so its stand-in is the residual
  // y_j - mu_j - z_j tau_j, which absorbs u_j on average.
  std::vector<double> est(n), lo(n), hi(n), col(dr.n_kept);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < dr.n_kept; ++k) {
      double v = 0.0;
      if (dr.kind == ModelKind::Bcf) {
        v = d.y()[j] - at(dr.mu, n, k, j);
        if (d.z()[j] == 1) v -= at(dr.tau, n, k, j);
      } else {
        v = at(dr.u, n, k, j);
        if (dr.kind == ModelKind::Ibcf && !dr.v.empty()) v += at(dr.v, n, k, j);
      }
      col[k] = v;
    }
    const IntervalStats s = summarize_column(col);
    est[j] = s.post_mean;
    lo[j] = s.lo;
    hi[j] = s.hi;
  }

  double sse = 0.0, wsum = 0.0, csum = 0.0;
  std::vector<double> target(n);
  for (int j = 0; j < n; ++j) {
    target[j] = truth.u[j] + truth.v[j];
    sse += (est[j] - target[j]) * (est[j] - target[j]);
    wsum += hi[j] - lo[j];
    csum += (lo[j] <= target[j] && target[j] <= hi[j]) ? 1.0 : 0.0;
  }

  const int k_top = n / 4;
  auto top_set = [&](const std::vector<double>& vals) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k_top, idx.end(),
                      [&](int a, int b) { return vals[a] > vals[b]; });
    return std::set<int>(idx.begin(), idx.begin() + k_top);
  };
  const std::set<int> top_est = top_set(est);
  const std::set<int> top_true = top_set(target);
  int hits = 0;
  for (int j : top_est) hits += top_true.count(j) ? 1 : 0;

  ExemplarSummary out;
  out.rmse = std::sqrt(sse / n);
  out.width90 = wsum / n;
  out.coverage90 = csum / n;
  out.top_quartile_precision = static_cast<double>(hits) / k_top;
  return out;
}

SigmaUSummary sigma_u_metrics(const PosteriorDraws& dr, double truth_sigma_u) {
  if (dr.kind == ModelKind::Bcf)
    throw UsageError("sigma_u is not a Bcf parameter");
  if (dr.n_kept < 1) throw UsageError("posterior holds no retained draws");
  const IntervalStats s = summarize_column(dr.sigma_u);
  SigmaUSummary out;
  out.post_mean = s.post_mean;
  out.squared_error = (s.post_mean - truth_sigma_u) * (s.post_mean - truth_sigma_u);
  out.width90 = s.hi - s.lo;
  out.covered90 = (s.lo <= truth_sigma_u && truth_sigma_u <= s.hi) ? 1.0 : 0.0;
  return out;
}

std::vector<MetricRow> evaluate_replicate(const PosteriorDraws& dr, const Truth& truth,
                                          const Dataset& d, const std::string& model_label,
                                          int replicate_id, bool ute_truth_includes_v) {
  std::vector<MetricRow> rows;
  auto push = [&](const std::string& estimand, const std::string& metric, double value) {
    rows.push_back({replicate_id, model_label, estimand, metric, value});
  };

  const SattSummary satt = satt_metrics(dr, truth, d);
  push("satt", "estimate", satt.estimate);
  push("satt", "squared_error", satt.squared_error);
  push("satt", "width90", satt.width90);
  push("satt", "covered90", satt.covered90);

  const UteSummary ute = ute_metrics(dr, truth, d, ute_truth_includes_v);
  push("ute", "rmse", ute.rmse);
  push("ute", "width90", ute.width90);
  push("ute", "covered90", ute.coverage90);

  const ExemplarSummary ex = exemplar_metrics(dr, truth, d);
  push("exemplar", "rmse", ex.rmse);
  push("exemplar", "width90", ex.width90);
  push("exemplar", "covered90", ex.coverage90);
  push("exemplar", "top_quartile_precision", ex.top_quartile_precision);

  if (dr.kind != ModelKind::Bcf) {
    const SigmaUSummary su = sigma_u_metrics(dr, truth.sigma_u);
    push("sigma_u", "post_mean", su.post_mean);
    push("sigma_u", "squared_error", su.squared_error);
    push("sigma_u", "width90", su.width90);
    push("sigma_u", "covered90", su.covered90);
  }
  if (dr.kind == ModelKind::Ibcf) {
    push("sigma_v", "post_mean", mean(dr.sigma_v));
    push("rho", "post_mean", mean(dr.rho));
  }
  return rows;
}

Comparison compare_models(const std::vector<MetricRow>& rows, const std::string& estimand,
                          const std::string& metric, const std::string& model_a,
                          const std::string& model_b) {
  std::map<int, double> va, vb;
  for (const MetricRow& r : rows) {
    if (r.estimand != estimand || r.metric != metric) continue;
    if (r.model == model_a) va[r.replicate_id] = r.value;
    else if (r.model == model_b) vb[r.replicate_id] = r.value;
  }
  std::vector<double> a, b, diff;
  for (const auto& [rep, value] : va) {
    auto it = vb.find(rep);
    if (it == vb.end()) continue;
    a.push_back(value);
    b.push_back(it->second);
    diff.push_back(it->second - value);
  }
  if (diff.empty())
    throw UsageError("no paired replicates for " + estimand + "/" + metric);

  Comparison c;
  c.estimand = estimand;
  c.metric = metric;
  c.mean_a = mean(a);
  c.mean_b = mean(b);
  c.gamma = mean(diff);
  const int r = static_cast<int>(diff.size());
  if (r >= 2) {
    c.se = sample_sd(diff) / std::sqrt(static_cast<double>(r));
    if (c.se > 0.0) {
      const double tcrit = student_t_quantile(0.975, r - 1);
      c.significant = std::abs(c.gamma) > tcrit * c.se;
    } else {
      c.significant = c.gamma != 0.0;
    }
  } else {
    c.se = 0.0;
    c.significant = false;
  }
  c.pct_improvement = c.mean_a != 0.0 ? 100.0 * (c.mean_a - c.mean_b) / c.mean_a : 0.0;
  return c;
}

std::vector<Comparison> compare_all(const std::vector<MetricRow>& rows,
                                    const std::string& model_a, const std::string& model_b) {
  std::set<std::pair<std::string, std::string>> seen_a, seen_b;
  std::vector<std::pair<std::string, std::string>> order;
  for (const MetricRow& r : rows) {
    const auto key = std::make_pair(r.estimand, r.metric);
    if (r.model == model_a) {
      if (seen_a.insert(key).second && seen_b.count(key)) order.push_back(key);
    } else if (r.model == model_b) {
      if (seen_b.insert(key).second && seen_a.count(key)) order.push_back(key);
    }
  }
  std::vector<Comparison> out;
  out.reserve(order.size());
  for (const auto& [estimand, metric] : order)
    out.push_back(compare_models(rows, estimand, metric, model_a, model_b));
  return out;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  CsvTable t;
  t.header = {"replicate", "model", "estimand", "metric", "value"};
  t.rows.reserve(rows.size());
  for (const MetricRow& r : rows)
    t.rows.push_back({std::to_string(r.replicate_id), r.model, r.estimand, r.metric,
                      format_double(r.value)});
  write_csv(path, t);
}

std::vector<MetricRow> load_metrics_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c_rep = t.require_column("replicate");
  const int c_model = t.require_column("model");
  const int c_est = t.require_column("estimand");
  const int c_met = t.require_column("metric");
  const int c_val = t.require_column("value");
  std::vector<MetricRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    MetricRow m;
    m.replicate_id = static_cast<int>(parse_long(r[c_rep], "replicate"));
    m.model = r[c_model];
    m.estimand = r[c_est];
    m.metric = r[c_met];
    m.value = parse_double(r[c_val], "value");
    rows.push_back(std::move(m));
  }
  return rows;
}

void write_comparison_csv(const std::vector<Comparison>& comps, const std::string& model_a,
                          const std::string& model_b, const std::string& path) {
  CsvTable t;
  t.header = {"estimand", "metric",     "model_a",     "model_b",
              "mean_a",   "mean_b",     "difference",  "se",
              "significant", "pct_improvement"};
  for (const Comparison& c : comps)
    t.rows.push_back({c.estimand, c.metric, model_a, model_b, format_double(c.mean_a),
                      format_double(c.mean_b), format_double(c.gamma), format_double(c.se),
                      c.significant ? "1" : "0", format_double(c.pct_improvement)});
  write_csv(path, t);
}

}  // namespace abcf
