// Command-line surface for the abcf library: simulate | fit | evaluate | sweep.
// Every command resolves options as defaults < config file < flags, snapshots
// the resolved configuration into <out>/manifest.json, and exits 0 on success,
// 1 on usage/config errors, 2 on data errors, 3 on numerical failures.

#include <abcf.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{1, message}; }

void check_status(int status) {
  if (status != ABCF_OK) throw CliError{status, abcf_last_error()};
}

// ---------- C handle RAII ----------

using DatasetPtr = std::unique_ptr<abcf_dataset, void (*)(abcf_dataset*)>;
using TruthPtr = std::unique_ptr<abcf_truth, void (*)(abcf_truth*)>;
using DrawsPtr = std::unique_ptr<abcf_draws, void (*)(abcf_draws*)>;
using MetricsPtr = std::unique_ptr<abcf_metrics, void (*)(abcf_metrics*)>;

DatasetPtr load_dataset(const std::string& path, const std::string& schema) {
  abcf_dataset* p = nullptr;
  check_status(abcf_dataset_load(path.c_str(), schema.empty() ? nullptr : schema.c_str(), &p));
  return {p, &abcf_dataset_free};
}

TruthPtr load_truth(const std::string& path) {
  abcf_truth* p = nullptr;
  check_status(abcf_truth_load(path.c_str(), &p));
  return {p, &abcf_truth_free};
}

DrawsPtr load_draws(const std::string& dir) {
  abcf_draws* p = nullptr;
  check_status(abcf_draws_load(dir.c_str(), &p));
  return {p, &abcf_draws_free};
}

MetricsPtr make_metrics() { return {abcf_metrics_new(), &abcf_metrics_free}; }

// ---------- small string utilities ----------

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    const std::string item = trim(s.substr(pos, end - pos));
    if (!item.empty()) out.push_back(item);
    pos = end + 1;
  }
  return out;
}

double parse_double_str(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) usage_error(what + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) usage_error(what + ": '" + t + "' is not a number");
  return v;
}

long long parse_int_str(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t.empty()) usage_error(what + ": empty integer");
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) usage_error(what + ": '" + t + "' is not an integer");
  return v;
}

std::string rep_name(int r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03d", r);
  return buf;
}

int model_id(const std::string& name) {
  if (name == "bcf") return ABCF_MODEL_BCF;
  if (name == "abcf") return ABCF_MODEL_ABCF;
  if (name == "ibcf") return ABCF_MODEL_IBCF;
  usage_error("unknown model '" + name + "' (expected bcf, abcf, or ibcf)");
}

int model_rank(const std::string& label) {
  if (label == "bcf") return 0;
  if (label == "abcf") return 1;
  if (label == "ibcf") return 2;
  return 3;
}

// Deterministic seed derivation for (base, replicate, model) fits.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(base ^ mix64(a)) ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// ---------- config files ----------

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{1, path + ": cannot open config file"};
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw CliError{1, path + ":" + std::to_string(lineno) + ": expected key=value"};
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw CliError{1, path + ":" + std::to_string(lineno) + ": empty key"};
    out[key] = value;
  }
  return out;
}

// Resolves defaults < config file < flags and accumulates the manifest
// snapshot of every final value.
class Config {
 public:
  Config(CLI::App* cmd, const std::string& config_path) : cmd_(cmd) {
    if (!config_path.empty()) file_ = read_config_file(config_path);
  }

  void apply(const std::string& key, std::string& var) {
    if (use_file(key)) var = file_[key];
    snapshot_[key] = var;
  }
  void apply(const std::string& key, int& var) {
    if (use_file(key)) var = static_cast<int>(parse_int_str(file_[key], "config key " + key));
    snapshot_[key] = var;
  }
  void apply(const std::string& key, std::uint64_t& var) {
    if (use_file(key))
      var = static_cast<std::uint64_t>(parse_int_str(file_[key], "config key " + key));
    snapshot_[key] = var;
  }
  void apply(const std::string& key, double& var) {
    if (use_file(key)) var = parse_double_str(file_[key], "config key " + key);
    snapshot_[key] = var;
  }
  void apply(const std::string& key, bool& var) {
    if (use_file(key)) {
      const std::string v = file_[key];
      if (v == "1" || v == "true") var = true;
      else if (v == "0" || v == "false") var = false;
      else usage_error("config key " + key + ": '" + v + "' is not a boolean");
    }
    snapshot_[key] = var;
  }

  // Rejects config keys that no apply() call claimed.
  void finish() const {
    for (const auto& [key, value] : file_)
      if (!known_.count(key)) usage_error("unknown config key '" + key + "'");
  }

  const json& snapshot() const { return snapshot_; }

 private:
  bool use_file(const std::string& key) {
    known_.insert(key);
    if (cmd_->count("--" + key) > 0) return false;
    return file_.count(key) > 0;
  }

  CLI::App* cmd_;
  std::map<std::string, std::string> file_;
  std::set<std::string> known_;
  json snapshot_ = json::object();
};

// ---------- manifests ----------

std::string iso_now() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs, double wall_seconds) {
  json j{{"command", command},
         {"version", abcf_version()},
         {"config", config},
         {"outputs", outputs},
         {"generated_at", iso_now()},
         {"wall_clock_seconds", wall_seconds}};
  const fs::path path = out_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw CliError{2, path.string() + ": cannot open for writing"};
  out << j.dump(2) << "\n";
  if (!out.good()) throw CliError{2, path.string() + ": write failed"};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{2, dir.string() + ": cannot create directory (" + ec.message() + ")"};
}

// ---------- simulate ----------

struct SimFlags {
  std::string out, config_path;
  int reps = 1;
  std::uint64_t seed = 0;
  int units = 3000, treated = -1, covariates = 5;
  double sd_y = 147.0, sd_mu = 83.0, sd_tau = 17.0;
  double sigma_u = 61.0, sigma_eps = 2557.0, sigma_v = 8.0, rho = 0.0;
  double residual_share = -1.0;
};

// DGP shape flags; out/reps/seed/config are registered by each command.
void add_dgp_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--units", f.units, "aggregate units per replicate");
  cmd->add_option("--treated", f.treated, "treated units (default: units/3)");
  cmd->add_option("--covariates", f.covariates, "covariate count");
  cmd->add_option("--sd-y", f.sd_y, "target outcome sd");
  cmd->add_option("--sd-mu", f.sd_mu, "target prognostic sd");
  cmd->add_option("--sd-tau", f.sd_tau, "target effect sd");
  cmd->add_option("--sigma-u", f.sigma_u, "random-effect sd");
  cmd->add_option("--sigma-eps", f.sigma_eps, "individual error sd");
  cmd->add_option("--sigma-v", f.sigma_v, "random treatment-effect sd");
  cmd->add_option("--rho", f.rho, "corr(u, v)");
  cmd->add_option("--residual-share", f.residual_share,
                  "fraction of residual variance from u (reallocates sigma-u/sigma-eps)");
}

void resolve_dgp_flags(Config& cfg, SimFlags& f) {
  cfg.apply("units", f.units);
  cfg.apply("treated", f.treated);
  cfg.apply("covariates", f.covariates);
  cfg.apply("sd-y", f.sd_y);
  cfg.apply("sd-mu", f.sd_mu);
  cfg.apply("sd-tau", f.sd_tau);
  cfg.apply("sigma-u", f.sigma_u);
  cfg.apply("sigma-eps", f.sigma_eps);
  cfg.apply("sigma-v", f.sigma_v);
  cfg.apply("rho", f.rho);
  cfg.apply("residual-share", f.residual_share);
}

abcf_dgp_config dgp_config_from(const SimFlags& f) {
  abcf_dgp_config cfg;
  abcf_dgp_config_init(&cfg);
  cfg.n_units = f.units;
  cfg.n_treated = f.treated >= 0 ? f.treated : static_cast<int>(std::lround(f.units / 3.0));
  cfg.n_covariates = f.covariates;
  cfg.sd_y_target = f.sd_y;
  cfg.sd_mu_target = f.sd_mu;
  cfg.sd_tau_target = f.sd_tau;
  cfg.sigma_u = f.sigma_u;
  cfg.sigma_eps = f.sigma_eps;
  cfg.sigma_v = f.sigma_v;
  cfg.rho = f.rho;
  cfg.residual_share = f.residual_share;
  cfg.seed = f.seed;
  return cfg;
}

// One replicate of the scenario as live handles.
void simulate_pair(const abcf_dgp_config& cfg, int r, DatasetPtr* d, TruthPtr* t) {
  abcf_dataset* data = nullptr;
  abcf_truth* truth = nullptr;
  check_status(abcf_simulate(&cfg, static_cast<std::uint64_t>(r), &data, &truth));
  d->reset(data);
  t->reset(truth);
}

// rep_XXX.csv / rep_XXX_truth.csv in dir.
void write_replicate(const DatasetPtr& d, const TruthPtr& t, const fs::path& dir, int r,
                     std::vector<std::string>* outputs) {
  const std::string data_path = (dir / (rep_name(r) + ".csv")).string();
  const std::string truth_path = (dir / (rep_name(r) + "_truth.csv")).string();
  check_status(abcf_dataset_write(d.get(), data_path.c_str()));
  check_status(abcf_truth_write(t.get(), d.get(), truth_path.c_str()));
  if (outputs != nullptr) {
    outputs->push_back(data_path);
    outputs->push_back(truth_path);
  }
}

int run_simulate(CLI::App* cmd, SimFlags& f) {
  Stopwatch watch;
  Config cfg(cmd, f.config_path);
  cfg.apply("out", f.out);
  cfg.apply("reps", f.reps);
  cfg.apply("seed", f.seed);
  resolve_dgp_flags(cfg, f);
  cfg.finish();
  if (f.out.empty()) usage_error("simulate: --out is required");
  if (f.reps < 1) usage_error("simulate: --reps must be at least 1");

  ensure_dir(f.out);
  const abcf_dgp_config dgp = dgp_config_from(f);
  std::vector<std::string> outputs;
  for (int r = 1; r <= f.reps; ++r) {
    DatasetPtr d(nullptr, &abcf_dataset_free);
    TruthPtr t(nullptr, &abcf_truth_free);
    simulate_pair(dgp, r, &d, &t);
    write_replicate(d, t, f.out, r, &outputs);
  }
  write_manifest(f.out, "simulate", cfg.snapshot(), outputs, watch.seconds());
  std::printf("wrote %d replicate%s to %s\n", f.reps, f.reps == 1 ? "" : "s",
              f.out.c_str());
  return 0;
}

// ---------- fit ----------

struct FitFlags {
  std::string data, out, config_path, model = "abcf", schema;
  std::uint64_t seed = 0;
  int burn = 1000, draws = 1000, thin = 1;
  int trees_mu = 200, trees_tau = 50, cutpoints = 100;
  double prior_mult = 1.0, psi = 25.0;
  double pin_sigma_u = std::nan(""), pin_sigma_v = std::nan(""), pin_rho = std::nan("");
  bool fixed_proposals = false;
  double proposal_sd = std::nan("");
};

void add_fit_model_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--burn", f.burn, "burn-in iterations");
  cmd->add_option("--draws", f.draws, "retained draws");
  cmd->add_option("--thin", f.thin, "thinning interval");
  cmd->add_option("--trees-mu", f.trees_mu, "prognostic forest size");
  cmd->add_option("--trees-tau", f.trees_tau, "treatment forest size");
  cmd->add_option("--cutpoints", f.cutpoints, "cutpoints per covariate");
  cmd->add_option("--prior-mult", f.prior_mult, "sigma_u prior scale multiplier");
  cmd->add_option("--psi", f.psi, "superpopulation ATE scale for the sigma_v prior");
}

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "dataset CSV");
  cmd->add_option("--out,-o", f.out, "output directory");
  cmd->add_option("--config", f.config_path, "key=value config file");
  cmd->add_option("--model", f.model, "bcf | abcf | ibcf");
  cmd->add_option("--seed", f.seed, "chain seed");
  cmd->add_option("--schema", f.schema, "column mapping, e.g. y=outcome,w=size");
  add_fit_model_flags(cmd, f);
  cmd->add_option("--pin-sigma-u", f.pin_sigma_u, "hold sigma_u fixed at this value");
  cmd->add_option("--pin-sigma-v", f.pin_sigma_v, "hold sigma_v fixed at this value");
  cmd->add_option("--pin-rho", f.pin_rho, "hold rho fixed at this value");
  cmd->add_flag("--fixed-proposals", f.fixed_proposals, "disable burn-in proposal adaptation");
  cmd->add_option("--proposal-sd", f.proposal_sd, "initial proposal sd for every parameter");
}

void resolve_fit_model_flags(Config& cfg, FitFlags& f) {
  cfg.apply("model", f.model);
  cfg.apply("burn", f.burn);
  cfg.apply("draws", f.draws);
  cfg.apply("thin", f.thin);
  cfg.apply("trees-mu", f.trees_mu);
  cfg.apply("trees-tau", f.trees_tau);
  cfg.apply("cutpoints", f.cutpoints);
  cfg.apply("prior-mult", f.prior_mult);
  cfg.apply("psi", f.psi);
}

abcf_fit_config fit_config_from(const FitFlags& f, int model, std::uint64_t seed) {
  abcf_fit_config cfg;
  abcf_fit_config_init(&cfg);
  cfg.model = model;
  cfg.n_burn = f.burn;
  cfg.n_draw = f.draws;
  cfg.thinning = f.thin;
  cfg.n_trees_mu = f.trees_mu;
  cfg.n_trees_tau = f.trees_tau;
  cfg.n_cutpoints = f.cutpoints;
  cfg.sigma_u_prior_scale_multiplier = f.prior_mult;
  cfg.psi = f.psi;
  cfg.pin_sigma_u = f.pin_sigma_u;
  cfg.pin_sigma_v = f.pin_sigma_v;
  cfg.pin_rho = f.pin_rho;
  cfg.disable_adaptation = f.fixed_proposals ? 1 : 0;
  cfg.initial_proposal_sd = f.proposal_sd;
  cfg.seed = seed;
  return cfg;
}

int run_fit(CLI::App* cmd, FitFlags& f) {
  Stopwatch watch;
  Config cfg(cmd, f.config_path);
  cfg.apply("data", f.data);
  cfg.apply("out", f.out);
  cfg.apply("seed", f.seed);
  cfg.apply("schema", f.schema);
  resolve_fit_model_flags(cfg, f);
  {
    cfg.apply("pin-sigma-u", f.pin_sigma_u);
    cfg.apply("pin-sigma-v", f.pin_sigma_v);
    cfg.apply("pin-rho", f.pin_rho);
    cfg.apply("fixed-proposals", f.fixed_proposals);
    cfg.apply("proposal-sd", f.proposal_sd);
  }
  cfg.finish();
  if (f.data.empty()) usage_error("fit: --data is required");
  if (f.out.empty()) usage_error("fit: --out is required");
  const int model = model_id(f.model);

  const DatasetPtr d = load_dataset(f.data, f.schema);
  abcf_draws* raw = nullptr;
  const abcf_fit_config fc = fit_config_from(f, model, f.seed);
  check_status(abcf_fit(d.get(), &fc, &raw));
  DrawsPtr dr(raw, &abcf_draws_free);

  ensure_dir(f.out);
  check_status(abcf_draws_write(dr.get(), f.out.c_str()));
  std::vector<std::string> outputs{(fs::path(f.out) / "scalars.csv").string(),
                                   (fs::path(f.out) / "mu.csv").string(),
                                   (fs::path(f.out) / "tau.csv").string(),
                                   (fs::path(f.out) / "report.json").string()};
  write_manifest(f.out, "fit", cfg.snapshot(), outputs, watch.seconds());

  char* report = nullptr;
  check_status(abcf_draws_report_json(dr.get(), &report));
  const json rep = json::parse(report);
  abcf_string_free(report);
  std::printf("fit model=%s units=%d kept=%d -> %s\n", f.model.c_str(),
              abcf_draws_n_units(dr.get()), abcf_draws_n_kept(dr.get()), f.out.c_str());
  for (const auto& name : rep.value("flagged", std::vector<std::string>{}))
    std::fprintf(stderr, "warning: %s acceptance rate outside [0.2, 0.7]\n", name.c_str());
  for (const auto& w : rep.value("warnings", std::vector<std::string>{}))
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

// ---------- evaluate ----------

struct EvalFlags {
  std::string sim, out, config_path, model_a, model_b;
  std::vector<std::string> draws_dirs;
  bool ute_truth_tau_only = false;
};

// "<label>_rep_<k>" directory names carry the model label and replicate id;
// anything else is replicate 1 labeled by the stored model.
void split_draws_dir(const std::string& dir, std::string* label, int* rep) {
  const std::string base = fs::path(dir).filename().string();
  const std::size_t pos = base.rfind("_rep_");
  if (pos != std::string::npos && pos > 0) {
    const std::string digits = base.substr(pos + 5);
    if (!digits.empty() &&
        digits.find_first_not_of("0123456789") == std::string::npos) {
      *label = base.substr(0, pos);
      *rep = static_cast<int>(parse_int_str(digits, "replicate suffix"));
      return;
    }
  }
  label->clear();
  *rep = 1;
}

std::vector<std::string> order_labels(const std::set<std::string>& labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    const int ra = model_rank(a), rb = model_rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  return out;
}

int run_evaluate(CLI::App* cmd, EvalFlags& f) {
  Stopwatch watch;
  Config cfg(cmd, f.config_path);
  cfg.apply("sim", f.sim);
  cfg.apply("out", f.out);
  cfg.apply("model-a", f.model_a);
  cfg.apply("model-b", f.model_b);
  cfg.apply("ute-truth-tau-only", f.ute_truth_tau_only);
  cfg.finish();
  if (f.sim.empty()) usage_error("evaluate: --sim is required");
  if (f.out.empty()) usage_error("evaluate: --out is required");
  if (f.draws_dirs.empty()) usage_error("evaluate: pass at least one draws directory");

  MetricsPtr metrics = make_metrics();
  std::set<std::string> labels;
  int n_scored = 0;
  for (const std::string& dir : f.draws_dirs) {
    std::string label;
    int rep = 1;
    split_draws_dir(dir, &label, &rep);
    const DrawsPtr dr = load_draws(dir);
    if (label.empty()) {
      const char* names[] = {"bcf", "abcf", "ibcf"};
      label = names[abcf_draws_model(dr.get())];
    }
    const fs::path sim(f.sim);
    const std::string data_path = (sim / (rep_name(rep) + ".csv")).string();
    const std::string truth_path = (sim / (rep_name(rep) + "_truth.csv")).string();
    const DatasetPtr d = load_dataset(data_path, "");
    const TruthPtr t = load_truth(truth_path);
    check_status(abcf_evaluate(metrics.get(), dr.get(), t.get(), d.get(), label.c_str(),
                               rep, f.ute_truth_tau_only ? 0 : 1));
    labels.insert(label);
    ++n_scored;
  }

  ensure_dir(f.out);
  const std::string metrics_path = (fs::path(f.out) / "metrics.csv").string();
  check_status(abcf_metrics_write_csv(metrics.get(), metrics_path.c_str()));
  std::vector<std::string> outputs{metrics_path};

  std::vector<std::pair<std::string, std::string>> pairs;
  if (!f.model_a.empty() || !f.model_b.empty()) {
    if (f.model_a.empty() || f.model_b.empty())
      usage_error("evaluate: --model-a and --model-b must be given together");
    pairs.emplace_back(f.model_a, f.model_b);
  } else {
    const std::vector<std::string> ordered = order_labels(labels);
    for (std::size_t i = 0; i < ordered.size(); ++i)
      for (std::size_t j = i + 1; j < ordered.size(); ++j)
        pairs.emplace_back(ordered[i], ordered[j]);
  }
  for (const auto& [a, b] : pairs) {
    const std::string name =
        pairs.size() == 1 ? "comparison.csv" : "comparison_" + a + "_vs_" + b + ".csv";
    const std::string path = (fs::path(f.out) / name).string();
    check_status(abcf_compare_write_csv(metrics.get(), a.c_str(), b.c_str(), path.c_str()));
    outputs.push_back(path);
  }

  write_manifest(f.out, "evaluate", cfg.snapshot(), outputs, watch.seconds());
  std::printf("evaluated %d run%s (%zu model%s) -> %s\n", n_scored, n_scored == 1 ? "" : "s",
              labels.size(), labels.size() == 1 ? "" : "s", f.out.c_str());
  return 0;
}

// ---------- sweep ----------

struct SweepFlags {
  SimFlags sim;
  FitFlags fit;
  std::string axis, values, models_override, out, config_path;
  int reps = 30;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct Scenario {
  std::string value;       // as given on the axis
  abcf_dgp_config dgp;
  double prior_mult;
  std::vector<std::string> models;
};

// Fits every (replicate, model) task of one scenario, scoring each fit into
// the shared metrics accumulator. Tasks run on up to `workers` threads; the
// final sort restores a canonical row order.
void run_scenario_fits(const Scenario& sc, const std::vector<DatasetPtr>& data,
                       const std::vector<TruthPtr>& truths, const SweepFlags& f,
                       abcf_metrics* metrics) {
  struct Task {
    int rep;
    int model_idx;
  };
  std::vector<Task> tasks;
  for (int r = 1; r <= f.reps; ++r)
    for (std::size_t m = 0; m < sc.models.size(); ++m)
      tasks.push_back({r, static_cast<int>(m)});

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex eval_mutex, error_mutex;
  std::optional<CliError> first_error;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      const Task& task = tasks[i];
      const std::string& model_name = sc.models[task.model_idx];
      try {
        FitFlags ff = f.fit;
        ff.prior_mult = sc.prior_mult;
        const std::uint64_t seed =
            derive_seed(f.seed, static_cast<std::uint64_t>(task.rep),
                        static_cast<std::uint64_t>(model_id(model_name)) + 101);
        const abcf_fit_config fc = fit_config_from(ff, model_id(model_name), seed);
        abcf_draws* raw = nullptr;
        check_status(abcf_fit(data[task.rep - 1].get(), &fc, &raw));
        DrawsPtr dr(raw, &abcf_draws_free);
        std::lock_guard<std::mutex> lock(eval_mutex);
        check_status(abcf_evaluate(metrics, dr.get(), truths[task.rep - 1].get(),
                                   data[task.rep - 1].get(), model_name.c_str(), task.rep,
                                   1));
      } catch (const CliError& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = e;
        failed.store(true);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = CliError{3, e.what()};
        failed.store(true);
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(f.workers, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) throw *first_error;
  check_status(abcf_metrics_sort(metrics));
}

// Appends a scenario-scoped CSV into a combined table, prefixing axis/value
// columns; the header is taken from the first file.
void merge_scenario_csv(const std::string& path, const std::string& axis,
                        const std::string& value, std::vector<std::string>* combined) {
  std::ifstream in(path);
  if (!in) throw CliError{2, path + ": cannot open"};
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (combined->empty()) combined->push_back("axis,scenario," + line);
      continue;
    }
    combined->push_back(axis + "," + value + "," + line);
  }
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw CliError{2, path + ": cannot open for writing"};
  for (const std::string& line : lines) out << line << "\n";
  if (!out.good()) throw CliError{2, path + ": write failed"};
}

std::vector<std::string> default_models_for_axis(const std::string& axis) {
  if (axis == "prior-mult") return {"abcf"};
  if (axis == "residual-share") return {"bcf", "abcf"};
  if (axis == "sigma-v" || axis == "rho") return {"ibcf"};
  return {};
}

int run_sweep(CLI::App* cmd, SweepFlags& f) {
  Stopwatch watch;
  Config cfg(cmd, f.config_path);
  cfg.apply("axis", f.axis);
  cfg.apply("values", f.values);
  cfg.apply("out", f.out);
  cfg.apply("reps", f.reps);
  cfg.apply("seed", f.seed);
  cfg.apply("workers", f.workers);
  cfg.apply("model", f.models_override);
  resolve_dgp_flags(cfg, f.sim);
  resolve_fit_model_flags(cfg, f.fit);
  cfg.finish();

  if (f.out.empty()) usage_error("sweep: --out is required");
  if (f.axis != "prior-mult" && f.axis != "residual-share" && f.axis != "model" &&
      f.axis != "sigma-v" && f.axis != "rho")
    usage_error("sweep: --axis must be prior-mult, residual-share, model, sigma-v, or rho");
  const std::vector<std::string> values = split_commas(f.values);
  if (values.empty()) usage_error("sweep: --values lists no scenario values");
  if (f.reps < 1) usage_error("sweep: --reps must be at least 1");
  if (f.workers < 1) usage_error("sweep: --workers must be at least 1");

  // The model set per scenario: the model axis takes its values; other axes
  // use their conventional defaults unless --model overrides.
  std::vector<std::string> model_override = split_commas(f.models_override);
  for (const std::string& m : model_override) model_id(m);

  std::vector<Scenario> scenarios;
  for (const std::string& value : values) {
    Scenario sc;
    sc.value = value;
    SimFlags sim = f.sim;
    sim.seed = f.seed;
    sc.prior_mult = f.fit.prior_mult;
    if (f.axis == "model") {
      model_id(value);
      sc.models = {value};
    } else {
      sc.models = model_override.empty() ? default_models_for_axis(f.axis) : model_override;
      if (f.axis == "prior-mult") sc.prior_mult = parse_double_str(value, "--values");
      else if (f.axis == "residual-share") {
        const double share = parse_double_str(value, "--values");
        if (share < 0.0 || share > 1.0)
          usage_error("sweep: residual share '" + value + "' outside [0, 1]");
        sim.residual_share = share;
      } else if (f.axis == "sigma-v") sim.sigma_v = parse_double_str(value, "--values");
      else if (f.axis == "rho") sim.rho = parse_double_str(value, "--values");
    }
    if (sc.models.empty()) usage_error("sweep: no models to fit for axis " + f.axis);
    sc.dgp = dgp_config_from(sim);
    scenarios.push_back(std::move(sc));
  }

  ensure_dir(f.out);
  std::vector<std::string> outputs;
  std::vector<std::string> combined_metrics, combined_comparisons;
  for (const Scenario& sc : scenarios) {
    const fs::path sc_dir = fs::path(f.out) / ("scenario_" + f.axis + "_" + sc.value);
    const fs::path data_dir = sc_dir / "data";
    ensure_dir(data_dir);

    std::vector<DatasetPtr> data;
    std::vector<TruthPtr> truths;
    for (int r = 1; r <= f.reps; ++r) {
      DatasetPtr d(nullptr, &abcf_dataset_free);
      TruthPtr t(nullptr, &abcf_truth_free);
      simulate_pair(sc.dgp, r, &d, &t);
      write_replicate(d, t, data_dir, r, nullptr);
      data.push_back(std::move(d));
      truths.push_back(std::move(t));
    }

    MetricsPtr metrics = make_metrics();
    run_scenario_fits(sc, data, truths, f, metrics.get());

    const std::string metrics_path = (sc_dir / "metrics.csv").string();
    check_status(abcf_metrics_write_csv(metrics.get(), metrics_path.c_str()));
    outputs.push_back(metrics_path);
    merge_scenario_csv(metrics_path, f.axis, sc.value, &combined_metrics);

    std::set<std::string> labels(sc.models.begin(), sc.models.end());
    const std::vector<std::string> ordered = order_labels(labels);
    for (std::size_t i = 0; i < ordered.size(); ++i)
      for (std::size_t j = i + 1; j < ordered.size(); ++j) {
        const std::string name = ordered.size() == 2
                                     ? "comparison.csv"
                                     : "comparison_" + ordered[i] + "_vs_" + ordered[j] +
                                           ".csv";
        const std::string path = (sc_dir / name).string();
        check_status(abcf_compare_write_csv(metrics.get(), ordered[i].c_str(),
                                            ordered[j].c_str(), path.c_str()));
        outputs.push_back(path);
        merge_scenario_csv(path, f.axis, sc.value, &combined_comparisons);
      }

    std::printf("scenario %s=%s: %d replicate%s x %zu model%s\n", f.axis.c_str(),
                sc.value.c_str(), f.reps, f.reps == 1 ? "" : "s", sc.models.size(),
                sc.models.size() == 1 ? "" : "s");
    std::fflush(stdout);
  }

  const std::string combined_path = (fs::path(f.out) / "sweep_metrics.csv").string();
  write_lines(combined_path, combined_metrics);
  outputs.push_back(combined_path);
  if (!combined_comparisons.empty()) {
    const std::string comp_path = (fs::path(f.out) / "sweep_comparisons.csv").string();
    write_lines(comp_path, combined_comparisons);
    outputs.push_back(comp_path);
  }
  write_manifest(f.out, "sweep", cfg.snapshot(), outputs, watch.seconds());
  std::printf("sweep %s over %zu scenario%s -> %s\n", f.axis.c_str(), scenarios.size(),
              scenarios.size() == 1 ? "" : "s", f.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aggregate Bayesian causal forests: simulate, fit, evaluate, sweep"};
  app.require_subcommand(1);

  SimFlags sim_flags;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate calibrated replicates");
  sim_cmd->add_option("--out,-o", sim_flags.out, "output directory");
  sim_cmd->add_option("--config", sim_flags.config_path, "key=value config file");
  sim_cmd->add_option("--reps", sim_flags.reps, "number of replicates");
  sim_cmd->add_option("--seed", sim_flags.seed, "base seed");
  add_dgp_flags(sim_cmd, sim_flags);

  FitFlags fit_flags;
  CLI::App* fit_cmd = app.add_subcommand("fit", "run one MCMC fit on a dataset");
  add_fit_flags(fit_cmd, fit_flags);

  EvalFlags eval_flags;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score fits against truth");
  eval_cmd->add_option("--sim", eval_flags.sim, "directory of rep_XXX(.csv|_truth.csv)");
  eval_cmd->add_option("--out,-o", eval_flags.out, "output directory");
  eval_cmd->add_option("--config", eval_flags.config_path, "key=value config file");
  eval_cmd->add_option("--model-a", eval_flags.model_a, "baseline label for the comparison");
  eval_cmd->add_option("--model-b", eval_flags.model_b, "contrast label for the comparison");
  eval_cmd->add_flag("--ute-truth-tau-only", eval_flags.ute_truth_tau_only,
                     "score unit effects against tau alone (exclude v)");
  eval_cmd->add_option("draws", eval_flags.draws_dirs, "draws directories (label_rep_NNN)");

  SweepFlags sweep_flags;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "simulate+fit+evaluate across an axis");
  sweep_cmd->add_option("--axis", sweep_flags.axis,
                        "prior-mult | residual-share | model | sigma-v | rho");
  sweep_cmd->add_option("--values", sweep_flags.values, "comma-separated scenario values");
  sweep_cmd->add_option("--out,-o", sweep_flags.out, "output directory");
  sweep_cmd->add_option("--config", sweep_flags.config_path, "key=value config file");
  sweep_cmd->add_option("--reps", sweep_flags.reps, "replicates per scenario");
  sweep_cmd->add_option("--seed", sweep_flags.seed, "base seed shared across scenarios");
  sweep_cmd->add_option("--workers", sweep_flags.workers, "concurrent fits");
  sweep_cmd->add_option("--model", sweep_flags.models_override,
                        "override the fitted models (comma-separated)");
  add_dgp_flags(sweep_cmd, sweep_flags.sim);
  add_fit_model_flags(sweep_cmd, sweep_flags.fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim_cmd, sim_flags);
    if (fit_cmd->parsed()) return run_fit(fit_cmd, fit_flags);
    if (eval_cmd->parsed()) return run_evaluate(eval_cmd, eval_flags);
    if (sweep_cmd->parsed()) return run_sweep(sweep_cmd, sweep_flags);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
