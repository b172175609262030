#include "abcf.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "dgp.hpp"
#include "draws_io.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "fit.hpp"
#include "variance.hpp"

struct abcf_dataset {
  abcf::Dataset d;
};
struct abcf_truth {
  abcf::Truth t;
};
struct abcf_draws {
  abcf::PosteriorDraws d;
};
struct abcf_metrics {
  std::vector<abcf::MetricRow> rows;
};

namespace {

thread_local std::string g_last_error;

template <class F>
int guarded(F&& f) {
  try {
    f();
    return ABCF_OK;
  } catch (const abcf::UsageError& e) {
    g_last_error = e.what();
    return ABCF_ERR_USAGE;
  } catch (const abcf::DataError& e) {
    g_last_error = e.what();
    return ABCF_ERR_DATA;
  } catch (const abcf::NumericError& e) {
    g_last_error = e.what();
    return ABCF_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ABCF_ERR_NUMERIC;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

abcf::DatasetSchema parse_schema(const char* schema) {
  abcf::DatasetSchema s;
  if (schema == nullptr) return s;
  std::string text(schema);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw abcf::UsageError("schema item '" + item + "' is not key=column");
    const std::string key = item.substr(0, eq);
    const std::string col = item.substr(eq + 1);
    if (key == "unit_id") s.unit_id = col;
    else if (key == "y") s.y = col;
    else if (key == "z") s.z = col;
    else if (key == "w") s.w = col;
    else if (key == "pi") s.pi = col;
    else throw abcf::UsageError("unknown schema key '" + key + "'");
  }
  return s;
}

abcf::DgpConfig to_dgp_config(const abcf_dgp_config& c) {
  abcf::DgpConfig cfg;
  cfg.n_units = c.n_units;
  cfg.n_treated = c.n_treated;
  cfg.p = c.n_covariates;
  cfg.sd_y_target = c.sd_y_target;
  cfg.sd_mu_target = c.sd_mu_target;
  cfg.sd_tau_target = c.sd_tau_target;
  cfg.sigma_u = c.sigma_u;
  cfg.sigma_eps = c.sigma_eps;
  cfg.sigma_v = c.sigma_v;
  cfg.rho = c.rho;
  cfg.residual_share_override = c.residual_share;
  cfg.seed = c.seed;
  return cfg;
}

abcf::FitConfig to_fit_config(const abcf_fit_config& c) {
  abcf::FitConfig cfg;
  switch (c.model) {
    case ABCF_MODEL_BCF: cfg.model_kind = abcf::ModelKind::Bcf; break;
    case ABCF_MODEL_ABCF: cfg.model_kind = abcf::ModelKind::Abcf; break;
    case ABCF_MODEL_IBCF: cfg.model_kind = abcf::ModelKind::Ibcf; break;
    default: throw abcf::UsageError("model must be one of ABCF_MODEL_*");
  }
  cfg.n_burn = c.n_burn;
  cfg.n_draw = c.n_draw;
  cfg.thinning = c.thinning;
  cfg.n_trees_mu = c.n_trees_mu;
  cfg.n_trees_tau = c.n_trees_tau;
  cfg.n_cutpoints = c.n_cutpoints;
  cfg.sigma_u_prior_scale_multiplier = c.sigma_u_prior_scale_multiplier;
  cfg.psi = c.psi;
  cfg.pin_sigma_u = c.pin_sigma_u;
  cfg.pin_sigma_v = c.pin_sigma_v;
  cfg.pin_rho = c.pin_rho;
  cfg.disable_adaptation = c.disable_adaptation != 0;
  cfg.initial_proposal_sd = c.initial_proposal_sd;
  cfg.seed = c.seed;
  return cfg;
}

}  // namespace

extern "C" {

const char* abcf_version(void) { return "1.0.0"; }

const char* abcf_last_error(void) { return g_last_error.c_str(); }

void abcf_string_free(char* s) { delete[] s; }

/* ---------- datasets ---------- */

int abcf_dataset_load(const char* path, const char* schema, abcf_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_dataset_load: null argument");
    const abcf::DatasetSchema s = parse_schema(schema);
    *out = new abcf_dataset{abcf::load_dataset(path, s)};
  });
}

int abcf_dataset_write(const abcf_dataset* d, const char* path) {
  return guarded([&] {
    if (d == nullptr || path == nullptr)
      throw abcf::UsageError("abcf_dataset_write: null argument");
    abcf::write_dataset(d->d, path);
  });
}

int abcf_dataset_create(int n, int p, const char* const* unit_ids, const double* y,
                        const int* z, const double* w, const double* pi,
                        const double* x, abcf_dataset** out) {
  return guarded([&] {
    if (out == nullptr || y == nullptr || z == nullptr || w == nullptr ||
        pi == nullptr || (p > 0 && x == nullptr))
      throw abcf::UsageError("abcf_dataset_create: null argument");
    if (n < 2) throw abcf::UsageError("abcf_dataset_create: need at least two units");
    std::vector<abcf::AggregateUnit> units(n);
    for (int j = 0; j < n; ++j) {
      abcf::AggregateUnit& u = units[j];
      u.unit_id = unit_ids != nullptr ? unit_ids[j] : std::to_string(j + 1);
      u.y = y[j];
      u.z = z[j];
      u.w = w[j];
      u.pi = pi[j];
      u.x.assign(x + static_cast<std::size_t>(j) * p,
                 x + static_cast<std::size_t>(j + 1) * p);
    }
    *out = new abcf_dataset{abcf::Dataset::create(std::move(units))};
  });
}

int abcf_dataset_n(const abcf_dataset* d) { return d != nullptr ? d->d.n() : 0; }
int abcf_dataset_p(const abcf_dataset* d) { return d != nullptr ? d->d.p() : 0; }
int abcf_dataset_n_treated(const abcf_dataset* d) {
  return d != nullptr ? d->d.n_treated() : 0;
}

int abcf_dataset_summary_json(const abcf_dataset* d, char** out) {
  return guarded([&] {
    if (d == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_dataset_summary_json: null argument");
    const abcf::DatasetSummary s = d->d.summarize();
    nlohmann::json j{{"n", s.n},
                     {"p", s.p},
                     {"n_treated", s.n_treated},
                     {"w_min", s.w_min},
                     {"w_q25", s.w_q25},
                     {"w_median", s.w_median},
                     {"w_q75", s.w_q75},
                     {"w_max", s.w_max},
                     {"w_mean", s.w_mean},
                     {"weighted_mean_y", s.weighted_mean_y},
                     {"weighted_sd_y", s.weighted_sd_y}};
    *out = copy_string(j.dump(2) + "\n");
  });
}

void abcf_dataset_free(abcf_dataset* d) { delete d; }

/* ---------- simulation ---------- */

void abcf_dgp_config_init(abcf_dgp_config* cfg) {
  if (cfg == nullptr) return;
  const abcf::DgpConfig d;
  cfg->n_units = d.n_units;
  cfg->n_treated = d.n_treated;
  cfg->n_covariates = d.p;
  cfg->sd_y_target = d.sd_y_target;
  cfg->sd_mu_target = d.sd_mu_target;
  cfg->sd_tau_target = d.sd_tau_target;
  cfg->sigma_u = d.sigma_u;
  cfg->sigma_eps = d.sigma_eps;
  cfg->sigma_v = d.sigma_v;
  cfg->rho = d.rho;
  cfg->residual_share = d.residual_share_override;
  cfg->seed = d.seed;
}

int abcf_simulate(const abcf_dgp_config* cfg, uint64_t replicate_index,
                  abcf_dataset** data, abcf_truth** truth) {
  return guarded([&] {
    if (cfg == nullptr || data == nullptr || truth == nullptr)
      throw abcf::UsageError("abcf_simulate: null argument");
    abcf::Replicate rep = abcf::make_replicate(to_dgp_config(*cfg), replicate_index);
    *data = new abcf_dataset{std::move(rep.data)};
    *truth = new abcf_truth{std::move(rep.truth)};
  });
}

int abcf_truth_write(const abcf_truth* t, const abcf_dataset* d, const char* path) {
  return guarded([&] {
    if (t == nullptr || d == nullptr || path == nullptr)
      throw abcf::UsageError("abcf_truth_write: null argument");
    abcf::write_truth(t->t, d->d.unit_ids(), path);
  });
}

int abcf_truth_load(const char* path, abcf_truth** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_truth_load: null argument");
    *out = new abcf_truth{abcf::load_truth(path)};
  });
}

double abcf_truth_satt(const abcf_truth* t) { return t != nullptr ? t->t.satt : 0.0; }
double abcf_truth_sigma_u(const abcf_truth* t) {
  return t != nullptr ? t->t.sigma_u : 0.0;
}

void abcf_truth_free(abcf_truth* t) { delete t; }

/* ---------- fitting ---------- */

void abcf_fit_config_init(abcf_fit_config* cfg) {
  if (cfg == nullptr) return;
  const abcf::FitConfig f;
  cfg->model = ABCF_MODEL_ABCF;
  cfg->n_burn = f.n_burn;
  cfg->n_draw = f.n_draw;
  cfg->thinning = f.thinning;
  cfg->n_trees_mu = f.n_trees_mu;
  cfg->n_trees_tau = f.n_trees_tau;
  cfg->n_cutpoints = f.n_cutpoints;
  cfg->sigma_u_prior_scale_multiplier = f.sigma_u_prior_scale_multiplier;
  cfg->psi = f.psi;
  cfg->pin_sigma_u = f.pin_sigma_u;
  cfg->pin_sigma_v = f.pin_sigma_v;
  cfg->pin_rho = f.pin_rho;
  cfg->disable_adaptation = f.disable_adaptation ? 1 : 0;
  cfg->initial_proposal_sd = f.initial_proposal_sd;
  cfg->seed = f.seed;
}

int abcf_fit(const abcf_dataset* d, const abcf_fit_config* cfg, abcf_draws** out) {
  return guarded([&] {
    if (d == nullptr || cfg == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_fit: null argument");
    *out = new abcf_draws{abcf::fit(d->d, to_fit_config(*cfg))};
  });
}

int abcf_draws_write(const abcf_draws* dr, const char* dir) {
  return guarded([&] {
    if (dr == nullptr || dir == nullptr)
      throw abcf::UsageError("abcf_draws_write: null argument");
    abcf::write_draws(dr->d, dir);
  });
}

int abcf_draws_load(const char* dir, abcf_draws** out) {
  return guarded([&] {
    if (dir == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_draws_load: null argument");
    *out = new abcf_draws{abcf::load_draws(dir)};
  });
}

int abcf_draws_report_json(const abcf_draws* dr, char** out) {
  return guarded([&] {
    if (dr == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_draws_report_json: null argument");
    *out = copy_string(abcf::report_json(dr->d));
  });
}

int abcf_draws_model(const abcf_draws* dr) {
  if (dr == nullptr) return -1;
  switch (dr->d.kind) {
    case abcf::ModelKind::Bcf: return ABCF_MODEL_BCF;
    case abcf::ModelKind::Abcf: return ABCF_MODEL_ABCF;
    default: return ABCF_MODEL_IBCF;
  }
}

int abcf_draws_n_kept(const abcf_draws* dr) { return dr != nullptr ? dr->d.n_kept : 0; }
int abcf_draws_n_units(const abcf_draws* dr) { return dr != nullptr ? dr->d.n_units : 0; }

const double* abcf_draws_series(const abcf_draws* dr, const char* name, int* len) {
  if (len != nullptr) *len = 0;
  if (dr == nullptr || name == nullptr) return nullptr;
  const std::vector<double>* v = nullptr;
  const std::string n(name);
  if (n == "sigma_eps") v = &dr->d.sigma_eps;
  else if (n == "sigma_u") v = &dr->d.sigma_u;
  else if (n == "sigma_v") v = &dr->d.sigma_v;
  else if (n == "rho") v = &dr->d.rho;
  else if (n == "b0") v = &dr->d.b0;
  else if (n == "b1") v = &dr->d.b1;
  if (v == nullptr || v->empty()) return nullptr;
  if (len != nullptr) *len = static_cast<int>(v->size());
  return v->data();
}

const double* abcf_draws_matrix(const abcf_draws* dr, const char* name, int* n_kept,
                                int* n_units) {
  if (n_kept != nullptr) *n_kept = 0;
  if (n_units != nullptr) *n_units = 0;
  if (dr == nullptr || name == nullptr) return nullptr;
  const std::vector<double>* v = nullptr;
  const std::string n(name);
  if (n == "mu") v = &dr->d.mu;
  else if (n == "tau") v = &dr->d.tau;
  else if (n == "u") v = &dr->d.u;
  else if (n == "v") v = &dr->d.v;
  if (v == nullptr || v->empty()) return nullptr;
  if (n_kept != nullptr) *n_kept = dr->d.n_kept;
  if (n_units != nullptr) *n_units = dr->d.n_units;
  return v->data();
}

void abcf_draws_free(abcf_draws* dr) { delete dr; }

/* ---------- evaluation ---------- */

abcf_metrics* abcf_metrics_new(void) { return new abcf_metrics{}; }
void abcf_metrics_free(abcf_metrics* m) { delete m; }

int abcf_evaluate(abcf_metrics* m, const abcf_draws* dr, const abcf_truth* t,
                  const abcf_dataset* d, const char* model_label, int replicate_id,
                  int ute_truth_includes_v) {
  return guarded([&] {
    if (m == nullptr || dr == nullptr || t == nullptr || d == nullptr)
      throw abcf::UsageError("abcf_evaluate: null argument");
    const std::string label = model_label != nullptr
                                  ? std::string(model_label)
                                  : std::string(abcf::model_kind_name(dr->d.kind));
    std::vector<abcf::MetricRow> rows = abcf::evaluate_replicate(
        dr->d, t->t, d->d, label, replicate_id, ute_truth_includes_v != 0);
    m->rows.insert(m->rows.end(), std::make_move_iterator(rows.begin()),
                   std::make_move_iterator(rows.end()));
  });
}

int abcf_metrics_count(const abcf_metrics* m) {
  return m != nullptr ? static_cast<int>(m->rows.size()) : 0;
}

int abcf_metrics_sort(abcf_metrics* m) {
  return guarded([&] {
    if (m == nullptr) throw abcf::UsageError("abcf_metrics_sort: null argument");
    std::stable_sort(m->rows.begin(), m->rows.end(),
                     [](const abcf::MetricRow& a, const abcf::MetricRow& b) {
                       if (a.replicate_id != b.replicate_id)
                         return a.replicate_id < b.replicate_id;
                       if (a.model != b.model) return a.model < b.model;
                       if (a.estimand != b.estimand) return a.estimand < b.estimand;
                       return a.metric < b.metric;
                     });
  });
}

int abcf_metrics_mean(const abcf_metrics* m, const char* model, const char* estimand,
                      const char* metric, double* out, int* count_out) {
  return guarded([&] {
    if (m == nullptr || model == nullptr || estimand == nullptr || metric == nullptr ||
        out == nullptr)
      throw abcf::UsageError("abcf_metrics_mean: null argument");
    double acc = 0.0;
    int count = 0;
    for (const abcf::MetricRow& r : m->rows) {
      if (r.model == model && r.estimand == estimand && r.metric == metric) {
        acc += r.value;
        ++count;
      }
    }
    if (count_out != nullptr) *count_out = count;
    if (count == 0)
      throw abcf::UsageError(std::string("no rows for ") + model + "/" + estimand + "/" +
                             metric);
    *out = acc / count;
  });
}

int abcf_metrics_write_csv(const abcf_metrics* m, const char* path) {
  return guarded([&] {
    if (m == nullptr || path == nullptr)
      throw abcf::UsageError("abcf_metrics_write_csv: null argument");
    abcf::write_metrics_csv(m->rows, path);
  });
}

int abcf_metrics_load_csv(const char* path, abcf_metrics** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw abcf::UsageError("abcf_metrics_load_csv: null argument");
    *out = new abcf_metrics{abcf::load_metrics_csv(path)};
  });
}

int abcf_compare_write_csv(const abcf_metrics* m, const char* model_a,
                           const char* model_b, const char* path) {
  return guarded([&] {
    if (m == nullptr || model_a == nullptr || model_b == nullptr || path == nullptr)
      throw abcf::UsageError("abcf_compare_write_csv: null argument");
    const std::vector<abcf::Comparison> comps =
        abcf::compare_all(m->rows, model_a, model_b);
    if (comps.empty())
      throw abcf::UsageError(std::string("no shared metrics between ") + model_a +
                             " and " + model_b);
    abcf::write_comparison_csv(comps, model_a, model_b, path);
  });
}

}  // extern "C"
