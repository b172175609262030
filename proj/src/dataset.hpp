#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abcf {

// One observation: an aggregate of w individuals with outcome y (already a
// per-individual average, natural units), treatment flag z, covariates x and
// propensity pi.
struct AggregateUnit {
  std::string unit_id;
  double y = 0.0;
  int z = 0;
  double w = 1.0;
  std::vector<double> x;
  double pi = 0.5;
};

struct DatasetSummary {
  int n = 0;
  int p = 0;
  int n_treated = 0;
  double w_min = 0.0, w_q25 = 0.0, w_median = 0.0, w_q75 = 0.0, w_max = 0.0;
  double w_mean = 0.0;
  double weighted_mean_y = 0.0;
  double weighted_sd_y = 0.0;
};

// Column mapping for load/write. If x_columns is empty, loading auto-detects
// x1..xp from the header.
struct DatasetSchema {
  std::string unit_id = "unit_id";
  std::string y = "y";
  std::string z = "z";
  std::string w = "w";
  std::string pi = "pi";
  std::vector<std::string> x_columns;
};

// Immutable after construction; stored column-major for the samplers.
class Dataset {
 public:
  // Validates invariants: finite fields, w > 0, pi in (0,1), z in {0,1},
  // consistent covariate dimension, at least one treated and one control.
  // Throws DataError naming the offending row (1-based over units).
  static Dataset create(std::vector<AggregateUnit> units);

  int n() const { return n_; }
  int p() const { return p_; }
  int n_treated() const { return n_treated_; }

  std::span<const double> y() const { return y_; }
  std::span<const int> z() const { return z_; }
  std::span<const double> w() const { return w_; }
  std::span<const double> pi() const { return pi_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  // Row j of the covariate matrix.
  std::span<const double> x_row(int j) const {
    return {x_.data() + static_cast<std::size_t>(j) * p_, static_cast<std::size_t>(p_)};
  }
  double x(int j, int k) const { return x_[static_cast<std::size_t>(j) * p_ + k]; }

  bool constant_w() const;
  DatasetSummary summarize() const;
  AggregateUnit unit(int j) const;

 private:
  Dataset() = default;
  int n_ = 0, p_ = 0, n_treated_ = 0;
  std::vector<std::string> unit_ids_;
  std::vector<double> y_, w_, pi_, x_;
  std::vector<int> z_;
};

// CSV round trip. load_dataset additionally enforces w >= 1 (file weights
// are individual counts); in-memory construction allows any positive real so
// synthetic fractional weights remain testable.
Dataset load_dataset(const std::string& path, const DatasetSchema& schema = {});
void write_dataset(const Dataset& d, const std::string& path,
                   const DatasetSchema& schema = {});

}  // namespace abcf
