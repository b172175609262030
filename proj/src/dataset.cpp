#include "dataset.hpp"

#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "errors.hpp"
#include "stats.hpp"

namespace abcf {

static void fail_row(int row, const std::string& what) {
  std::ostringstream msg;
  msg << "unit row " << row << ": " << what;
  throw DataError(msg.str());
}

Dataset Dataset::create(std::vector<AggregateUnit> units) {
  if (units.empty()) throw DataError("dataset has no units");
  Dataset d;
  d.n_ = static_cast<int>(units.size());
  d.p_ = static_cast<int>(units[0].x.size());
  d.unit_ids_.reserve(units.size());
  d.y_.reserve(units.size());
  d.z_.reserve(units.size());
  d.w_.reserve(units.size());
  d.pi_.reserve(units.size());
  d.x_.reserve(units.size() * units[0].x.size());
  for (int j = 0; j < d.n_; ++j) {
    const AggregateUnit& u = units[j];
    const int row = j + 1;
    if (static_cast<int>(u.x.size()) != d.p_) fail_row(row, "covariate dimension mismatch");
    if (!std::isfinite(u.y)) fail_row(row, "non-finite y");
    if (u.z != 0 && u.z != 1) fail_row(row, "z outside {0,1}");
    if (!std::isfinite(u.w) || u.w <= 0.0) fail_row(row, "w must be positive");
    if (!std::isfinite(u.pi) || u.pi <= 0.0 || u.pi >= 1.0)
      fail_row(row, "pi outside (0,1)");
    for (double xv : u.x)
      if (!std::isfinite(xv)) fail_row(row, "non-finite covariate");
    d.unit_ids_.push_back(u.unit_id);
    d.y_.push_back(u.y);
    d.z_.push_back(u.z);
    d.w_.push_back(u.w);
    d.pi_.push_back(u.pi);
    d.x_.insert(d.x_.end(), u.x.begin(), u.x.end());
    d.n_treated_ += u.z;
  }
  if (d.n_treated_ == 0) throw DataError("dataset has no treated units");
  if (d.n_treated_ == d.n_) throw DataError("dataset has no control units");
  return d;
}

bool Dataset::constant_w() const {
  for (double wv : w_)
    if (wv != w_[0]) return false;
  return true;
}

DatasetSummary Dataset::summarize() const {
  DatasetSummary s;
  s.n = n_;
  s.p = p_;
  s.n_treated = n_treated_;
  std::vector<double> ps{0.0, 0.25, 0.5, 0.75, 1.0};
  auto q = quantiles(w_, ps);
  s.w_min = q[0];
  s.w_q25 = q[1];
  s.w_median = q[2];
  s.w_q75 = q[3];
  s.w_max = q[4];
  s.w_mean = mean(w_);
  s.weighted_mean_y = weighted_mean(y_, w_);
  s.weighted_sd_y = weighted_sd(y_, w_);
  return s;
}

AggregateUnit Dataset::unit(int j) const {
  AggregateUnit u;
  u.unit_id = unit_ids_[j];
  u.y = y_[j];
  u.z = z_[j];
  u.w = w_[j];
  u.pi = pi_[j];
  auto row = x_row(j);
  u.x.assign(row.begin(), row.end());
  return u;
}

static std::vector<std::string> resolve_x_columns(const CsvTable& table,
                                                  const DatasetSchema& schema) {
  if (!schema.x_columns.empty()) return schema.x_columns;
  std::vector<std::string> cols;
  for (int k = 1;; ++k) {
    std::string name = "x" + std::to_string(k);
    if (table.column(name) < 0) break;
    cols.push_back(name);
  }
  if (cols.empty()) throw DataError("no covariate columns found (expected x1, x2, ...)");
  return cols;
}

Dataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  CsvTable table = read_csv(path);
  const int c_id = table.column(schema.unit_id);  // optional; synthesized if absent
  const int c_y = table.require_column(schema.y);
  const int c_z = table.require_column(schema.z);
  const int c_w = table.require_column(schema.w);
  const int c_pi = table.require_column(schema.pi);
  auto x_names = resolve_x_columns(table, schema);
  std::vector<int> c_x;
  for (const auto& name : x_names) c_x.push_back(table.require_column(name));

  std::vector<AggregateUnit> units;
  units.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    std::ostringstream ctx;
    ctx << path << " row " << (i + 2);  // +2: header plus 1-based
    AggregateUnit u;
    u.unit_id = c_id >= 0 ? row[c_id] : std::to_string(i + 1);
    u.y = parse_double(row[c_y], ctx.str() + " column " + schema.y);
    long z = parse_long(row[c_z], ctx.str() + " column " + schema.z);
    if (z != 0 && z != 1) throw DataError(ctx.str() + ": z outside {0,1}");
    u.z = static_cast<int>(z);
    u.w = parse_double(row[c_w], ctx.str() + " column " + schema.w);
    if (!(u.w >= 1.0)) throw DataError(ctx.str() + ": w < 1");
    u.pi = parse_double(row[c_pi], ctx.str() + " column " + schema.pi);
    if (!(u.pi > 0.0 && u.pi < 1.0)) throw DataError(ctx.str() + ": pi outside (0,1)");
    u.x.reserve(c_x.size());
    for (std::size_t k = 0; k < c_x.size(); ++k)
      u.x.push_back(parse_double(row[c_x[k]], ctx.str() + " column " + x_names[k]));
    units.push_back(std::move(u));
  }
  try {
    return Dataset::create(std::move(units));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_dataset(const Dataset& d, const std::string& path,
                   const DatasetSchema& schema) {
  CsvTable table;
  table.header.push_back(schema.unit_id);
  table.header.push_back(schema.y);
  table.header.push_back(schema.z);
  table.header.push_back(schema.w);
  table.header.push_back(schema.pi);
  std::vector<std::string> x_names = schema.x_columns;
  if (x_names.empty())
    for (int k = 1; k <= d.p(); ++k) x_names.push_back("x" + std::to_string(k));
  for (const auto& name : x_names) table.header.push_back(name);

  for (int j = 0; j < d.n(); ++j) {
    std::vector<std::string> row;
    row.push_back(d.unit_ids()[j]);
    row.push_back(format_double(d.y()[j]));
    row.push_back(std::to_string(d.z()[j]));
    row.push_back(format_double(d.w()[j]));
    row.push_back(format_double(d.pi()[j]));
    for (int k = 0; k < d.p(); ++k) row.push_back(format_double(d.x(j, k)));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

}  // namespace abcf
