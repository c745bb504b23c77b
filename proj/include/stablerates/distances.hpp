#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablerates/fbm.hpp"

namespace stable::distances {

struct EmpiricalSample {
  std::vector<double> values;
  std::string label;

  EmpiricalSample(std::vector<double> vals, std::string lab = "");
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log n, log d)
};

/// Empirical 1-Wasserstein distance. Equal sizes: mean |x_(i) - y_(i)| over
/// sorted order statistics; general sizes: quantile coupling on the merged
/// probability grid.
double wasserstein1(const EmpiricalSample& xs, const EmpiricalSample& ys);

/// Exact sup of the ECDF difference over the merged support.
double kolmogorov(const EmpiricalSample& xs, const EmpiricalSample& ys);

/// (1/2) int |p_hat - q_hat| with Gaussian-kernel densities on a common
/// 2048-point grid spanning both samples +- 4 bandwidths; trapezoid rule;
/// clamped to [0,1]. Default bandwidth: Silverman 1.06 sigma M^{-1/5}.
/// Degenerate (zero-variance) samples fall back to atom-matching TV.
double tv_kde(const EmpiricalSample& xs, const EmpiricalSample& ys,
              std::optional<double> bandwidth = std::nullopt);

/// A C^5 test function with sup-norm-normalized derivatives.
struct SmoothTestFunction {
  std::string name;
  std::function<double(double)> eval;
};

/// Default bank: cos, sin, logistic, gaussian.
const std::vector<SmoothTestFunction>& default_test_bank();

/// max over the bank of |mean phi(xs) - mean phi(ys)|.
double smooth_metric(const EmpiricalSample& xs, const EmpiricalSample& ys);
double smooth_metric(const EmpiricalSample& xs, const EmpiricalSample& ys,
                     const std::vector<SmoothTestFunction>& bank);

/// | (1/M) sum_j exp(i (mu B1_j + lambda F_j))
///   - E exp(i mu B_1 - lambda^2 c_H^2 B_1^2 / 2) |
/// with the closed-form limit (1 + a)^{-1/2} exp(-mu^2 / (2(1+a))),
/// a = lambda^2 c_H^2. Samples must be paired by replicate index.
double stable_cf_gap(std::span<const double> f_samples, std::span<const double> b1_samples,
                     double lambda, double mu, fbm::Hurst h);

/// Standard error of the empirical characteristic functional at (lambda, mu):
/// sqrt((Var cos + Var sin) / M).
double stable_cf_se(std::span<const double> f_samples, std::span<const double> b1_samples,
                    double lambda, double mu);

/// OLS of log d on log n.
RateFit rate_fit(std::span<const int> ns, std::span<const double> ds);

}  // namespace stable::distances
