#pragma once

#include <span>
#include <vector>

namespace abcf {

double mean(std::span<const double> x);
double sample_var(std::span<const double> x);  // denominator n-1
double sample_sd(std::span<const double> x);

double weighted_mean(std::span<const double> x, std::span<const double> w);
// Weighted variance about the weighted mean, denominator sum(w) (population
// form); this is the scale the outcome is standardized by.
double weighted_var(std::span<const double> x, std::span<const double> w);
double weighted_sd(std::span<const double> x, std::span<const double> w);

// Quantile with linear interpolation between order statistics (the common
// "type 7" rule: h = (n-1)p). p outside [0,1] is clamped.
double quantile(std::span<const double> x, double p);
// Same but for several probabilities at once; sorts a single copy.
std::vector<double> quantiles(std::span<const double> x, std::span<const double> ps);

double normal_cdf(double x);
double normal_quantile(double p);
double chi_squared_quantile(double p, double df);
double student_t_quantile(double p, double df);

// Residual variance (RSS / (n - k - 1)) from OLS of y on x (n-by-k, row
// major) plus an intercept. Returns sample_var(y) if the system is singular
// or the residual dof is not positive.
double ols_residual_variance(std::span<const double> y, std::span<const double> x,
                             int n, int k);

}  // namespace abcf
