#include "stablerates/distances.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "stablerates/functionals.hpp"
#include "stablerates/stats.hpp"

namespace stable::distances {

EmpiricalSample::EmpiricalSample(std::vector<double> vals, std::string lab)
    : values(std::move(vals)), label(std::move(lab)) {
  if (values.empty()) throw std::invalid_argument("EmpiricalSample: empty sample");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalSample: non-finite entry");
}

double wasserstein1(const EmpiricalSample& xs, const EmpiricalSample& ys) {
  std::vector<double> x = xs.values;
  std::vector<double> y = ys.values;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double acc = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double term = std::abs(x[i] - y[i]) - comp;
      const double t = acc + term;
      comp = (t - acc) - term;
      acc = t;
    }
    return acc / static_cast<double>(x.size());
  }
  // integral of |F^{-1} - G^{-1}| over the merged quantile partition
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double prev = 0.0, acc = 0.0;
  while (i < x.size() && j < y.size()) {
    const double qx = static_cast<double>(i + 1) / nx;
    const double qy = static_cast<double>(j + 1) / ny;
    const double q = std::min(qx, qy);
    acc += (q - prev) * std::abs(x[i] - y[j]);
    prev = q;
    if (qx <= q + 1e-15) ++i;
    if (qy <= q + 1e-15) ++j;
  }
  return acc;
}

double kolmogorov(const EmpiricalSample& xs, const EmpiricalSample& ys) {
  std::vector<double> x = xs.values;
  std::vector<double> y = ys.values;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j >= y.size() || (i < x.size() && x[i] <= y[j]))
      v = x[i];
    else
      v = y[j];
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return sup;
}

namespace {

// atom-matching TV for degenerate samples
double tv_atoms(const EmpiricalSample& xs, const EmpiricalSample& ys) {
  std::map<double, double> weights;
  const double wx = 1.0 / static_cast<double>(xs.values.size());
  const double wy = 1.0 / static_cast<double>(ys.values.size());
  for (double v : xs.values) weights[v] += wx;
  for (double v : ys.values) weights[v] -= wy;
  double acc = 0.0;
  for (const auto& [v, w] : weights) acc += std::abs(w);
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

}  // namespace

double tv_kde(const EmpiricalSample& xs, const EmpiricalSample& ys,
              std::optional<double> bandwidth) {
  if (bandwidth && !(*bandwidth > 0.0))
    throw std::invalid_argument("tv_kde: bandwidth must be positive");
  const auto sx = stats::mean_se(xs.values);
  const auto sy = stats::mean_se(ys.values);
  const double sd_x = sx.se * std::sqrt(static_cast<double>(sx.count));
  const double sd_y = sy.se * std::sqrt(static_cast<double>(sy.count));
  double h;
  if (bandwidth) {
    h = *bandwidth;
  } else {
    const double sd = std::min(sd_x > 0.0 ? sd_x : sd_y, sd_y > 0.0 ? sd_y : sd_x);
    if (!(sd > 0.0)) return tv_atoms(xs, ys);
    const double m = static_cast<double>(std::min(xs.values.size(), ys.values.size()));
    h = 1.06 * sd * std::pow(m, -0.2);
  }

  constexpr int kGrid = 2048;
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.values.begin(), xs.values.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.values.begin(), ys.values.end());
  const double lo = std::min(*xmin_it, *ymin_it) - 4.0 * h;
  const double hi = std::max(*xmax_it, *ymax_it) + 4.0 * h;
  const double step = (hi - lo) / (kGrid - 1);

  // Scatter each sample's kernel onto the grid (support truncated at 4h).
  auto densify = [&](const std::vector<double>& vals, std::vector<double>& dens) {
    dens.assign(kGrid, 0.0);
    const int reach = static_cast<int>(std::ceil(4.0 * h / step));
    const double norm = 1.0 / (static_cast<double>(vals.size()) * h *
                               std::sqrt(2.0 * std::numbers::pi));
    for (double v : vals) {
      const int center = static_cast<int>(std::floor((v - lo) / step));
      const int a = std::max(0, center - reach);
      const int b = std::min(kGrid - 1, center + reach + 1);
      for (int g = a; g <= b; ++g) {
        const double z = (lo + g * step - v) / h;
        dens[static_cast<std::size_t>(g)] += norm * std::exp(-0.5 * z * z);
      }
    }
  };
  std::vector<double> px, py;
  densify(xs.values, px);
  densify(ys.values, py);

  double acc = 0.0;
  for (int g = 0; g < kGrid; ++g) {
    const double d = std::abs(px[static_cast<std::size_t>(g)] - py[static_cast<std::size_t>(g)]);
    acc += (g == 0 || g == kGrid - 1) ? 0.5 * d : d;
  }
  return std::clamp(0.5 * acc * step, 0.0, 1.0);
}

const std::vector<SmoothTestFunction>& default_test_bank() {
  // every member keeps ||phi^(i)||_inf <= 1 for i <= 5 (the gaussian is
  // scaled by 1/6 because |d^5/dx^5 e^{-x^2/2}| peaks near 5.8)
  static const std::vector<SmoothTestFunction> bank = {
      {"cos", [](double x) { return std::cos(x); }},
      {"sin", [](double x) { return std::sin(x); }},
      {"logistic", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }},
      {"gauss6", [](double x) { return std::exp(-0.5 * x * x) / 6.0; }},
  };
  return bank;
}

double smooth_metric(const EmpiricalSample& xs, const EmpiricalSample& ys) {
  return smooth_metric(xs, ys, default_test_bank());
}

double smooth_metric(const EmpiricalSample& xs, const EmpiricalSample& ys,
                     const std::vector<SmoothTestFunction>& bank) {
  double gap = 0.0;
  for (const auto& phi : bank) {
    double mx = 0.0, cx = 0.0;
    for (double v : xs.values) {
      const double term = phi.eval(v) - cx;
      const double t = mx + term;
      cx = (t - mx) - term;
      mx = t;
    }
    double my = 0.0, cy = 0.0;
    for (double v : ys.values) {
      const double term = phi.eval(v) - cy;
      const double t = my + term;
      cy = (t - my) - term;
      my = t;
    }
    gap = std::max(gap, std::abs(mx / static_cast<double>(xs.values.size()) -
                                 my / static_cast<double>(ys.values.size())));
  }
  return gap;
}

double stable_cf_gap(std::span<const double> f_samples, std::span<const double> b1_samples,
                     double lambda, double mu, fbm::Hurst h) {
  if (f_samples.size() != b1_samples.size() || f_samples.empty())
    throw std::invalid_argument("stable_cf_gap: paired samples of equal nonzero size required");
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < f_samples.size(); ++i) {
    const double arg = mu * b1_samples[i] + lambda * f_samples[i];
    re += std::cos(arg);
    im += std::sin(arg);
  }
  const double M = static_cast<double>(f_samples.size());
  const std::complex<double> emp(re / M, im / M);
  const double a = lambda * lambda * functionals::c_H(h) * functionals::c_H(h);
  const double limit = std::exp(-mu * mu / (2.0 * (1.0 + a))) / std::sqrt(1.0 + a);
  return std::abs(emp - std::complex<double>(limit, 0.0));
}

double stable_cf_se(std::span<const double> f_samples, std::span<const double> b1_samples,
                    double lambda, double mu) {
  if (f_samples.size() != b1_samples.size() || f_samples.empty())
    throw std::invalid_argument("stable_cf_se: paired samples of equal nonzero size required");
  std::vector<double> cs(f_samples.size()), ss(f_samples.size());
  for (std::size_t i = 0; i < f_samples.size(); ++i) {
    const double arg = mu * b1_samples[i] + lambda * f_samples[i];
    cs[i] = std::cos(arg);
    ss[i] = std::sin(arg);
  }
  const auto mc = stats::mean_se(cs);
  const auto ms = stats::mean_se(ss);
  return std::sqrt(mc.se * mc.se + ms.se * ms.se);
}

RateFit rate_fit(std::span<const int> ns, std::span<const double> ds) {
  if (ns.size() != ds.size()) throw std::invalid_argument("rate_fit: length mismatch");
  if (ns.size() < 3) throw std::invalid_argument("rate_fit: at least 3 points required");
  RateFit fit;
  fit.points.reserve(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ds[i] > 0.0)) throw std::invalid_argument("rate_fit: distances must be positive");
    fit.points.emplace_back(std::log(static_cast<double>(ns[i])), std::log(ds[i]));
  }
  const double n = static_cast<double>(fit.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: degenerate abscissae");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

}  // namespace stable::distances
