#include "stablerates/functionals.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "stablerates/rng.hpp"

namespace stable::functionals {

double WeightFunction::d(int order, double x) const {
  if (order < 0 || order > max_order())
    throw std::invalid_argument("WeightFunction '" + name + "': derivative order " +
                                std::to_string(order) + " not supplied");
  return derivatives[static_cast<std::size_t>(order)](x);
}

const WeightFunction& weight_bank(const std::string& name) {
  static const std::map<std::string, WeightFunction> bank = [] {
    std::map<std::string, WeightFunction> b;
    {
      WeightFunction w;
      w.name = "one";
      for (int i = 0; i < 10; ++i)
        w.derivatives.emplace_back([i](double) { return i == 0 ? 1.0 : 0.0; });
      b.emplace(w.name, std::move(w));
    }
    {
      WeightFunction w;
      w.name = "zero";
      for (int i = 0; i < 10; ++i) w.derivatives.emplace_back([](double) { return 0.0; });
      b.emplace(w.name, std::move(w));
    }
    {
      WeightFunction w;
      w.name = "identity";
      for (int i = 0; i < 10; ++i)
        w.derivatives.emplace_back([i](double x) {
          if (i == 0) return x;
          return i == 1 ? 1.0 : 0.0;
        });
      b.emplace(w.name, std::move(w));
    }
    {
      WeightFunction w;
      w.name = "cos";
      for (int i = 0; i < 10; ++i)
        w.derivatives.emplace_back([i](double x) {
          switch (i % 4) {
            case 0: return std::cos(x);
            case 1: return -std::sin(x);
            case 2: return -std::cos(x);
            default: return std::sin(x);
          }
        });
      b.emplace(w.name, std::move(w));
    }
    {
      WeightFunction w;
      w.name = "one_plus_x2";
      for (int i = 0; i < 10; ++i)
        w.derivatives.emplace_back([i](double x) {
          if (i == 0) return 1.0 + x * x;
          if (i == 1) return 2.0 * x;
          return i == 2 ? 2.0 : 0.0;
        });
      b.emplace(w.name, std::move(w));
    }
    return b;
  }();
  auto it = bank.find(name);
  if (it == bank.end()) throw std::invalid_argument("weight_bank: unknown weight '" + name + "'");
  return it->second;
}

double c_H(fbm::Hurst h) {
  if (h.h < 0.5) throw std::domain_error("c_H: defined for H >= 1/2");
  // H(2H-1)Gamma(2H-1) = H Gamma(2H), removable at H = 1/2
  return std::sqrt(h.h * std::tgamma(2.0 * h.h));
}

LimitSpec::LimitSpec(LimitKind k, fbm::Hurst h, std::optional<WeightFunction> w)
    : kind(k), hurst(h), weight(std::move(w)) {
  if (kind == LimitKind::weighted_qv && !weight)
    throw std::invalid_argument("LimitSpec: weighted_qv limit requires a weight");
  if (kind == LimitKind::quadratic && weight)
    throw std::invalid_argument("LimitSpec: quadratic limit carries no weight");
}

double limit_sample(const LimitSpec& spec, const fbm::FbmPath& path, double eta) {
  if (spec.kind == LimitKind::quadratic) {
    if (path.grid.points.back() != 1.0)
      throw std::invalid_argument("limit_sample: quadratic limit needs B_1 on the grid");
    return c_H(spec.hurst) * std::abs(path.values.back()) * eta;
  }
  return weighted_limit_sample(path, *spec.weight, spec.hurst, eta);
}

namespace {

double sigma_H_series_uncached(fbm::Hurst h, double tol);

}  // namespace

double sigma_H_series(fbm::Hurst h, double tol) {
  static std::mutex cache_mutex;
  static std::map<std::pair<double, double>, double> cache;
  const std::pair<double, double> key{h.h, tol};
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double value = sigma_H_series_uncached(h, tol);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(key, value);
  return value;
}

namespace {

double sigma_H_series_uncached(fbm::Hurst h, double tol) {
  if (!(h.h > 0.25 && h.h < 0.75))
    throw std::domain_error("sigma_H_series: requires 1/4 < H < 3/4");
  if (!(tol > 0.0)) throw std::invalid_argument("sigma_H_series: tol must be positive");

  const double a = 2.0 * h.h;
  const long long P = 1'000'000;
  auto d_term = [&](long long p) {
    const double pd = static_cast<double>(p);
    return std::pow(pd + 1.0, a) + std::pow(std::abs(pd - 1.0), a) - 2.0 * std::pow(pd, a);
  };
  double sum = 0.0, comp = 0.0;  // sum_{p>=1} d_p^2, compensated
  for (long long p = 1; p <= P; ++p) {
    const double d = d_term(p);
    const double term = d * d - comp;
    const double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
  }

  // Asymptotic tail: d_p = A2 p^{a-2} + A4 p^{a-4} + A6 p^{a-6} + ...,
  // A_{2j} = 2 binom(a, 2j); remainder summed with Euler-Maclaurin.
  const double A2 = a * (a - 1.0);
  const double A4 = a * (a - 1.0) * (a - 2.0) * (a - 3.0) / 12.0;
  const double A6 = a * (a - 1.0) * (a - 2.0) * (a - 3.0) * (a - 4.0) * (a - 5.0) / 360.0;
  auto zeta_tail = [&](double s) {  // sum_{p > P} p^{-s}
    const double N = static_cast<double>(P);
    return std::pow(N, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(N, -s) +
           s / 12.0 * std::pow(N, -s - 1.0);
  };
  const double tail = A2 * A2 * zeta_tail(4.0 - 2.0 * a) +
                      2.0 * A2 * A4 * zeta_tail(6.0 - 2.0 * a) +
                      (A4 * A4 + 2.0 * A2 * A6) * zeta_tail(8.0 - 2.0 * a);
  // first neglected order: p^{2a-10}
  const double neglect =
      (std::abs(A4 * A6) + std::abs(A2) * std::abs(A6)) * 2.0 * zeta_tail(10.0 - 2.0 * a) +
      1e-15 * sum;
  if (neglect > tol)
    throw std::domain_error("sigma_H_series: requested tolerance not attainable");

  return 0.5 * 4.0 + sum + tail;  // p = 0 term is d_0^2/2 = 2
}

}  // namespace

double rho_nm(int n, int m, fbm::Hurst h) {
  if (h.h <= 0.5) throw std::domain_error("rho_nm: requires H > 1/2");
  if (n < 0 || m < 0) throw std::invalid_argument("rho_nm: negative exponent");
  const double H = h.h;
  return std::exp(std::lgamma(n + 1.0) + std::lgamma(2.0 * H - 1.0) - std::lgamma(n + 2.0 * H)) /
         (n + m + 2.0 * H);
}

// ---------------------------------------------------------------------------
// QuadFunctional
// ---------------------------------------------------------------------------

QuadFunctional::QuadFunctional(int n, fbm::Hurst h, int quad_points, double log_span)
    : n_(n), h_(h), quad_points_(quad_points), log_span_(log_span) {
  if (n < 1) throw std::invalid_argument("QuadFunctional: n >= 1 required");
  if (h.h < 0.5) throw std::domain_error("QuadFunctional: requires 1/2 <= H < 1");
  if (quad_points < 2 || (quad_points & (quad_points - 1)) != 0)
    throw std::invalid_argument("QuadFunctional: quad_points must be a power of two");
  if (static_cast<long long>(quad_points) > (1 << 14))
    throw std::length_error("QuadFunctional: quadrature grid budget exceeded");

  const int m = quad_points_;
  // x_i = X i/m, u_i = exp(-x_i), t_i = exp(-x_i/n); i = 0 is t = 1.
  std::vector<double> u(static_cast<std::size_t>(m) + 1);
  std::vector<double> t(static_cast<std::size_t>(m) + 1);
  for (int i = 0; i <= m; ++i) {
    const double x = log_span_ * i / m;
    u[static_cast<std::size_t>(i)] = std::exp(-x);
    t[static_cast<std::size_t>(i)] = std::exp(-x / n);
  }
  weights_.assign(static_cast<std::size_t>(m) + 1, 0.0);
  for (int i = 0; i < m; ++i) {
    const double du = u[static_cast<std::size_t>(i)] - u[static_cast<std::size_t>(i) + 1];
    weights_[static_cast<std::size_t>(i)] += 0.5 * du;
    weights_[static_cast<std::size_t>(i) + 1] += 0.5 * du;
  }
  // closing cell [0, u_min]: integrand at t = 0 equals B_1^2
  weights_[static_cast<std::size_t>(m)] += 0.5 * u[static_cast<std::size_t>(m)];
  closing_weight_ = 0.5 * u[static_cast<std::size_t>(m)];

  order_ = fbm::refinement_order(m);
  std::vector<double> times_in_order(order_.size());
  for (std::size_t j = 0; j < order_.size(); ++j)
    times_in_order[j] = t[static_cast<std::size_t>(order_[j])];
  sampler_ = std::make_unique<fbm::ClusterSampler>(std::move(times_in_order), h_);
}

double QuadFunctional::skorohod_shift() const {
  return h_.h * std::pow(static_cast<double>(n_), h_.h) / (2.0 * h_.h + n_);
}

double QuadFunctional::evaluate(std::span<const double> path_in_sampling_order) const {
  if (path_in_sampling_order.size() != order_.size())
    throw std::invalid_argument("evaluate: path size must match the quadrature grid");
  const double amp = 0.5 * std::pow(static_cast<double>(n_), h_.h);
  const double b1 = path_in_sampling_order[0];  // order_[0] == 0 is the t = 1 point
  double acc = closing_weight_ * b1 * b1;       // t = 0 endpoint of the closing cell
  double comp = 0.0;
  for (std::size_t j = 0; j < order_.size(); ++j) {
    const double w = weights_[static_cast<std::size_t>(order_[j])];
    const double bt = path_in_sampling_order[j];
    const double term = w * (b1 * b1 - bt * bt) - comp;
    const double t = acc + term;
    comp = (t - acc) - term;
    acc = t;
  }
  return amp * acc;
}

void QuadFunctional::sample_paths(std::uint64_t seed, std::uint64_t first, int count,
                                  Eigen::MatrixXd& out) const {
  sampler_->sample_block(seed, first, count, out);
}

void QuadFunctional::sample_block(std::uint64_t seed, std::uint64_t first, int count,
                                  std::span<double> a_out, std::span<double> b1_out,
                                  std::span<double> eta_out) const {
  if (count < 1 || count > fbm::ClusterSampler::kBlock)
    throw std::invalid_argument("sample_block: bad count");
  Eigen::MatrixXd block;
  sampler_->sample_block(seed, first, count, block);
  for (int c = 0; c < count; ++c) {
    const auto col = block.col(c);
    a_out[static_cast<std::size_t>(c)] =
        evaluate(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    b1_out[static_cast<std::size_t>(c)] = block(0, c);
    rng::ReplicaRng aux(seed ^ kEtaStreamTag, first + static_cast<std::uint64_t>(c));
    eta_out[static_cast<std::size_t>(c)] = aux.normal();
  }
}

FunctionalSample QuadFunctional::sample(std::uint64_t seed, std::uint64_t replica) const {
  double a, b1, eta;
  sample_block(seed, replica, 1, {&a, 1}, {&b1, 1}, {&eta, 1});
  FunctionalSample s;
  s.n = n_;
  s.value = a;
  s.b1 = b1;
  s.s_value = c_H(h_) * std::abs(b1);
  s.limit_value = s.s_value * eta;
  return s;
}

// ---------------------------------------------------------------------------
// Ito and weighted quadratic variation functionals
// ---------------------------------------------------------------------------

double ito_Fn_half(const fbm::FbmPath& path, int n) {
  if (n < 1) throw std::invalid_argument("ito_Fn_half: n >= 1 required");
  if (path.hurst.h != 0.5) throw std::invalid_argument("ito_Fn_half: path must have H = 1/2");
  if (!path.grid.is_uniform_from_zero())
    throw std::invalid_argument("ito_Fn_half: uniform grid from 0 required");
  const std::size_t m = path.grid.size() - 1;
  if (m < 8 * static_cast<std::size_t>(n))
    throw std::invalid_argument("ito_Fn_half: resolution guard requires grid >= 8n steps");
  const double horizon = path.grid.horizon();
  if (std::abs(horizon - 1.0) > 1e-12)
    throw std::invalid_argument("ito_Fn_half: horizon must be 1");

  double acc = 0.0, comp = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double tk = path.grid.points[k];
    const double term =
        std::pow(tk, n) * path.values[k] * (path.values[k + 1] - path.values[k]) - comp;
    const double t = acc + term;
    comp = (t - acc) - term;
    acc = t;
  }
  return std::sqrt(static_cast<double>(n)) * acc;
}

double skorohod_Fn(int n, fbm::Hurst h, std::uint64_t seed) {
  if (!(h.h > 0.5)) throw std::domain_error("skorohod_Fn: requires 1/2 < H < 1");
  const QuadFunctional qf(n, h);
  return qf.sample(seed, 0).value - qf.skorohod_shift();
}

namespace {

int checked_qv_grid(const fbm::FbmPath& path) {
  if (!path.grid.is_uniform_from_zero() || std::abs(path.grid.horizon() - 1.0) > 1e-12)
    throw std::invalid_argument("weighted QV: grid must be exactly {0, 1/n, ..., 1}");
  return static_cast<int>(path.grid.size()) - 1;
}

}  // namespace

double weighted_qv_Fn(const fbm::FbmPath& path, const WeightFunction& f, fbm::Hurst h) {
  if (!(h.h > 0.25 && h.h <= 0.5))
    throw std::domain_error("weighted_qv_Fn: experiments require H in (1/4, 1/2]");
  const int n = checked_qv_grid(path);
  const double neg2h = std::pow(static_cast<double>(n), -2.0 * h.h);
  double acc = 0.0, comp = 0.0;
  for (int k = 0; k < n; ++k) {
    const double db = path.values[static_cast<std::size_t>(k) + 1] -
                      path.values[static_cast<std::size_t>(k)];
    const double term = f.d(0, path.values[static_cast<std::size_t>(k)]) * (db * db - neg2h) - comp;
    const double t = acc + term;
    comp = (t - acc) - term;
    acc = t;
  }
  return std::pow(static_cast<double>(n), 2.0 * h.h - 0.5) * acc;
}

double weighted_limit_sample(const fbm::FbmPath& path, const WeightFunction& f, fbm::Hurst h,
                             double eta) {
  const int n = checked_qv_grid(path);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = f.d(0, path.values[static_cast<std::size_t>(k)]);
    acc += v * v;
  }
  const double s = std::sqrt(acc / n);
  return std::sqrt(sigma_H_series(h)) * s * eta;
}

}  // namespace stable::functionals
