#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace abcf {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_var(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("sample_var: need at least 2 values");
  double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_var(x)); }

double weighted_mean(std::span<const double> x, std::span<const double> w) {
  if (x.empty() || x.size() != w.size())
    throw std::invalid_argument("weighted_mean: size mismatch or empty");
  double sw = 0.0, sxw = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sxw += x[i] * w[i];
  }
  if (sw <= 0.0) throw std::invalid_argument("weighted_mean: nonpositive weight total");
  return sxw / sw;
}

double weighted_var(std::span<const double> x, std::span<const double> w) {
  double m = weighted_mean(x, w);
  double sw = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    s2 += w[i] * (x[i] - m) * (x[i] - m);
  }
  return s2 / sw;
}

double weighted_sd(std::span<const double> x, std::span<const double> w) {
  return std::sqrt(weighted_var(x, w));
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> ps{p};
  return quantiles(x, ps)[0];
}

std::vector<double> quantiles(std::span<const double> x, std::span<const double> ps) {
  if (x.empty()) throw std::invalid_argument("quantile: empty input");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(ps.size());
  const double nm1 = static_cast<double>(sorted.size() - 1);
  for (double p : ps) {
    p = std::clamp(p, 0.0, 1.0);
    double h = nm1 * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    out.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  return out;
}

double normal_cdf(double x) {
  static const boost::math::normal_distribution<double> dist;
  return boost::math::cdf(dist, x);
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> dist;
  return boost::math::quantile(dist, p);
}

double chi_squared_quantile(double p, double df) {
  boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

double student_t_quantile(double p, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

double ols_residual_variance(std::span<const double> y, std::span<const double> x,
                             int n, int k) {
  if (n <= 0 || static_cast<int>(y.size()) != n ||
      static_cast<int>(x.size()) != n * k)
    throw std::invalid_argument("ols_residual_variance: shape mismatch");
  const int m = k + 1;  // columns including intercept
  if (n - m <= 0) return sample_var(y);

  // Normal equations with the intercept as column 0; solved by Cholesky with
  // a singularity fallback.
  std::vector<double> xtx(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> xty(m, 0.0);
  std::vector<double> row(m);
  for (int i = 0; i < n; ++i) {
    row[0] = 1.0;
    for (int j = 0; j < k; ++j) row[j + 1] = x[static_cast<std::size_t>(i) * k + j];
    for (int a = 0; a < m; ++a) {
      xty[a] += row[a] * y[i];
      for (int b = a; b < m; ++b) xtx[static_cast<std::size_t>(a) * m + b] += row[a] * row[b];
    }
  }
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < a; ++b)
      xtx[static_cast<std::size_t>(a) * m + b] = xtx[static_cast<std::size_t>(b) * m + a];

  // Cholesky factorization, lower triangle in place.
  std::vector<double> chol(xtx);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b <= a; ++b) {
      double s = chol[static_cast<std::size_t>(a) * m + b];
      for (int c = 0; c < b; ++c)
        s -= chol[static_cast<std::size_t>(a) * m + c] * chol[static_cast<std::size_t>(b) * m + c];
      if (a == b) {
        if (s <= 1e-12) return sample_var(y);
        chol[static_cast<std::size_t>(a) * m + a] = std::sqrt(s);
      } else {
        chol[static_cast<std::size_t>(a) * m + b] = s / chol[static_cast<std::size_t>(b) * m + b];
      }
    }
  }
  // Solve L L' beta = X'y.
  std::vector<double> beta(xty);
  for (int a = 0; a < m; ++a) {
    for (int c = 0; c < a; ++c) beta[a] -= chol[static_cast<std::size_t>(a) * m + c] * beta[c];
    beta[a] /= chol[static_cast<std::size_t>(a) * m + a];
  }
  for (int a = m - 1; a >= 0; --a) {
    for (int c = a + 1; c < m; ++c) beta[a] -= chol[static_cast<std::size_t>(c) * m + a] * beta[c];
    beta[a] /= chol[static_cast<std::size_t>(a) * m + a];
  }

  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    double fit = beta[0];
    for (int j = 0; j < k; ++j) fit += beta[j + 1] * x[static_cast<std::size_t>(i) * k + j];
    double r = y[i] - fit;
    rss += r * r;
  }
  return rss / static_cast<double>(n - m);
}

}  // namespace abcf
