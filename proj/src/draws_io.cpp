#include "draws_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "variance.hpp"

namespace abcf {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_matrix_csv(const std::string& path, const std::vector<std::string>& unit_ids,
                      const std::vector<double>& m, int n_kept, int n_units) {
  CsvTable t;
  t.header.reserve(static_cast<std::size_t>(n_units) + 1);
  t.header.push_back("draw");
  for (const std::string& id : unit_ids) t.header.push_back(id);
  t.rows.reserve(n_kept);
  for (int k = 0; k < n_kept; ++k) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(n_units) + 1);
    row.push_back(std::to_string(k + 1));
    for (int j = 0; j < n_units; ++j)
      row.push_back(format_double(m[static_cast<std::size_t>(k) * n_units + j]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

std::vector<double> read_matrix_csv(const std::string& path,
                                    std::vector<std::string>* unit_ids, int* n_kept) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2 || t.header[0] != "draw")
    throw DataError(path + ": expected a draw column followed by unit columns");
  const int n_units = static_cast<int>(t.header.size()) - 1;
  if (unit_ids->empty()) {
    unit_ids->assign(t.header.begin() + 1, t.header.end());
  } else if (!std::equal(unit_ids->begin(), unit_ids->end(), t.header.begin() + 1,
                         t.header.end())) {
    throw DataError(path + ": unit columns disagree with the other draw files");
  }
  if (*n_kept < 0) *n_kept = static_cast<int>(t.rows.size());
  else if (*n_kept != static_cast<int>(t.rows.size()))
    throw DataError(path + ": draw count disagrees with the other draw files");
  std::vector<double> m;
  m.reserve(t.rows.size() * n_units);
  for (const auto& row : t.rows)
    for (int j = 0; j < n_units; ++j) m.push_back(parse_double(row[j + 1], path));
  return m;
}

std::vector<double> column_as_doubles(const CsvTable& t, const std::string& name,
                                      const std::string& path) {
  const int c = t.require_column(name);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) out.push_back(parse_double(row[c], path + ":" + name));
  return out;
}

}  // namespace

std::string report_json(const PosteriorDraws& draws) {
  const FitReport rep = fit_report(draws);
  json mh = json::array();
  for (const MhDiagnostic& d : rep.diagnostics) {
    mh.push_back({{"name", d.name},
                  {"proposal_sd", d.proposal_sd},
                  {"accepts", d.accepts},
                  {"attempts", d.attempts},
                  {"acceptance_rate", d.acceptance_rate()}});
  }
  json j{{"model", model_kind_name(draws.kind)},
         {"n_units", draws.n_units},
         {"n_kept", draws.n_kept},
         {"y_center", draws.y_center},
         {"y_scale", draws.y_scale},
         {"w_mean", draws.w_mean},
         {"forest_accept_mu", rep.forest_accept_mu},
         {"forest_accept_tau", rep.forest_accept_tau},
         {"mh", std::move(mh)},
         {"flagged", rep.flagged},
         {"warnings", rep.warnings}};
  return j.dump(2) + "\n";
}

void write_draws(const PosteriorDraws& draws, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir + ": cannot create directory (" + ec.message() + ")");

  CsvTable scalars;
  scalars.header = {"draw", "sigma_eps", "b0", "b1"};
  const bool has_u = !draws.sigma_u.empty();
  const bool has_v = !draws.sigma_v.empty();
  if (has_u) scalars.header.push_back("sigma_u");
  if (has_v) {
    scalars.header.push_back("sigma_v");
    scalars.header.push_back("rho");
  }
  scalars.rows.reserve(draws.n_kept);
  for (int k = 0; k < draws.n_kept; ++k) {
    std::vector<std::string> row{std::to_string(k + 1), format_double(draws.sigma_eps[k]),
                                 format_double(draws.b0[k]), format_double(draws.b1[k])};
    if (has_u) row.push_back(format_double(draws.sigma_u[k]));
    if (has_v) {
      row.push_back(format_double(draws.sigma_v[k]));
      row.push_back(format_double(draws.rho[k]));
    }
    scalars.rows.push_back(std::move(row));
  }
  const fs::path base(dir);
  write_csv((base / "scalars.csv").string(), scalars);
  write_matrix_csv((base / "mu.csv").string(), draws.unit_ids, draws.mu, draws.n_kept,
                   draws.n_units);
  write_matrix_csv((base / "tau.csv").string(), draws.unit_ids, draws.tau, draws.n_kept,
                   draws.n_units);
  if (!draws.u.empty())
    write_matrix_csv((base / "u.csv").string(), draws.unit_ids, draws.u, draws.n_kept,
                     draws.n_units);
  if (!draws.v.empty())
    write_matrix_csv((base / "v.csv").string(), draws.unit_ids, draws.v, draws.n_kept,
                     draws.n_units);

  std::ofstream rep((base / "report.json").string());
  if (!rep) throw DataError((base / "report.json").string() + ": cannot open for writing");
  rep << report_json(draws);
  if (!rep.good()) throw DataError((base / "report.json").string() + ": write failed");
}

PosteriorDraws load_draws(const std::string& dir) {
  const fs::path base(dir);
  const std::string rep_path = (base / "report.json").string();
  std::ifstream rep_in(rep_path);
  if (!rep_in) throw DataError(rep_path + ": cannot open");
  json rep;
  try {
    rep = json::parse(rep_in);
  } catch (const json::exception& e) {
    throw DataError(rep_path + ": " + e.what());
  }

  PosteriorDraws out;
  try {
    out.kind = parse_model_kind(rep.at("model").get<std::string>());
    out.y_center = rep.at("y_center").get<double>();
    out.y_scale = rep.at("y_scale").get<double>();
    out.w_mean = rep.at("w_mean").get<double>();
    out.forest_accept_mu = rep.at("forest_accept_mu").get<double>();
    out.forest_accept_tau = rep.at("forest_accept_tau").get<double>();
    for (const json& m : rep.at("mh")) {
      MhDiagnostic d;
      d.name = m.at("name").get<std::string>();
      d.proposal_sd = m.at("proposal_sd").get<double>();
      d.accepts = m.at("accepts").get<long>();
      d.attempts = m.at("attempts").get<long>();
      out.diagnostics.push_back(std::move(d));
    }
    if (rep.contains("warnings"))
      for (const json& w : rep.at("warnings")) out.warnings.push_back(w.get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(rep_path + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError(rep_path + ": " + std::string(e.what()));
  }

  int n_kept = -1;
  out.mu = read_matrix_csv((base / "mu.csv").string(), &out.unit_ids, &n_kept);
  out.tau = read_matrix_csv((base / "tau.csv").string(), &out.unit_ids, &n_kept);
  if (out.kind != ModelKind::Bcf)
    out.u = read_matrix_csv((base / "u.csv").string(), &out.unit_ids, &n_kept);
  if (out.kind == ModelKind::Ibcf)
    out.v = read_matrix_csv((base / "v.csv").string(), &out.unit_ids, &n_kept);
  out.n_units = static_cast<int>(out.unit_ids.size());
  out.n_kept = n_kept < 0 ? 0 : n_kept;

  const std::string sc_path = (base / "scalars.csv").string();
  const CsvTable sc = read_csv(sc_path);
  if (static_cast<int>(sc.rows.size()) != out.n_kept)
    throw DataError(sc_path + ": draw count disagrees with the draw matrices");
  out.sigma_eps = column_as_doubles(sc, "sigma_eps", sc_path);
  out.b0 = column_as_doubles(sc, "b0", sc_path);
  out.b1 = column_as_doubles(sc, "b1", sc_path);
  if (out.kind != ModelKind::Bcf) out.sigma_u = column_as_doubles(sc, "sigma_u", sc_path);
  if (out.kind == ModelKind::Ibcf) {
    out.sigma_v = column_as_doubles(sc, "sigma_v", sc_path);
    out.rho = column_as_doubles(sc, "rho", sc_path);
  }
  if (out.n_kept < 1) throw DataError(dir + ": no retained draws on disk");
  return out;
}

}  // namespace abcf
