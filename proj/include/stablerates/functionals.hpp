#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablerates/fbm.hpp"

namespace stable::functionals {

/// Scalar weight with an explicit derivative ladder. d(0) is the function
/// itself, d(i) its i-th derivative.
struct WeightFunction {
  std::string name;
  std::vector<std::function<double(double)>> derivatives;  // [0] = f
  bool moderate_growth = true;

  double d(int order, double x) const;
  int max_order() const { return static_cast<int>(derivatives.size()) - 1; }
};

/// Named weights used by the experiments: "one", "cos", "one_plus_x2",
/// "identity", "zero".
const WeightFunction& weight_bank(const std::string& name);

/// One Monte Carlo replicate of a functional together with its coupled
/// mixed-Gaussian limit draw.
struct FunctionalSample {
  int n = 0;
  double value = 0.0;        // the functional (A_n, F_n, or weighted QV)
  double limit_value = 0.0;  // same-path S * eta, eta fresh and independent
  double b1 = 0.0;           // conditioning value B_1
  double s_value = 0.0;      // realized S
};

/// Which mixed-Gaussian limit a functional converges to.
enum class LimitKind { quadratic, weighted_qv };

/// Limit description: the quadratic functionals converge to c_H |B_1| eta,
/// the weighted quadratic variation to sqrt(sigma_H) sqrt(int f^2(B)) eta.
/// A weight is carried exactly when kind == weighted_qv.
struct LimitSpec {
  LimitKind kind;
  fbm::Hurst hurst;
  std::optional<WeightFunction> weight;

  LimitSpec(LimitKind k, fbm::Hurst h, std::optional<WeightFunction> w = std::nullopt);
};

/// Coupled limit draw for a path replicate under the given spec. The
/// quadratic kind reads only the terminal value B_1; the weighted kind
/// averages f^2 along the path.
double limit_sample(const LimitSpec& spec, const fbm::FbmPath& path, double eta);

/// c_H = sqrt(H(2H-1)Gamma(2H-1)) for H > 1/2, extended continuously to
/// c_{1/2} = 1/sqrt(2) via H(2H-1)Gamma(2H-1) = H Gamma(2H).
double c_H(fbm::Hurst h);

/// sigma_H = (1/2) sum_p (|p+1|^{2H} + |p-1|^{2H} - 2|p|^{2H})^2, summed
/// directly to p = 10^6 with an asymptotic tail correction; the neglected
/// remainder is checked against tol. Requires 1/4 < H < 3/4.
double sigma_H_series(fbm::Hurst h, double tol = 1e-10);

/// rho_{n,m} = int_0^1 int_0^t s^n t^m (t-s)^{2H-2} ds dt
///           = Gamma(n+1) Gamma(2H-1) / (Gamma(n+2H) (n+m+2H)), H > 1/2.
double rho_nm(int n, int m, fbm::Hurst h);

/// Quadratic functional A_n = (n^{1+H}/2) int_0^1 t^{n-1} (B_1^2 - B_t^2) dt
/// evaluated after the substitution u = t^n on a log-spaced u-grid, with the
/// path sampled at the image points in refinement order (dense Cholesky; the
/// H = 1/2 case uses the exact Markov bridge). Limit S = c_H |B_1|.
class QuadFunctional {
 public:
  QuadFunctional(int n, fbm::Hurst h, int quad_points = 2048, double log_span = 40.0);

  int n() const { return n_; }
  int quad_points() const { return quad_points_; }
  double skorohod_shift() const;  // A_n - F_n = H n^H / (2H + n)

  /// Replicates [first, first+count), count <= fbm::ClusterSampler::kBlock.
  /// Outputs indexed 0..count-1.
  void sample_block(std::uint64_t seed, std::uint64_t first, int count,
                    std::span<double> a_out, std::span<double> b1_out,
                    std::span<double> eta_out) const;

  FunctionalSample sample(std::uint64_t seed, std::uint64_t replica) const;

  /// Quadrature value for an externally supplied path given in sampling
  /// order (entry 0 is the t = 1 value).
  double evaluate(std::span<const double> path_in_sampling_order) const;

  /// Raw path block in sampling order (rows follow the refinement order).
  void sample_paths(std::uint64_t seed, std::uint64_t first, int count,
                    Eigen::MatrixXd& out) const;

 private:
  int n_;
  fbm::Hurst h_;
  int quad_points_;
  double log_span_;
  std::vector<int> order_;        // sampling order of grid indices 0..m
  std::vector<double> weights_;   // du-trapezoid weights per grid index
  double closing_weight_ = 0.0;   // weight of the [0, u_min] cell on B_1^2
  std::unique_ptr<fbm::ClusterSampler> sampler_;
};

/// F_n = sqrt(n) int_0^1 t^n B_t dB_t as a left-point Ito sum on a uniform
/// grid with at least 8n steps. Path must have H = 1/2.
double ito_Fn_half(const fbm::FbmPath& path, int n);

/// Centered Skorohod integral F_n = A_n - H n^H/(2H + n) for 1/2 < H < 1,
/// sharing the path replicate with the A_n quadrature. One-shot form; batch
/// work should go through QuadFunctional directly.
double skorohod_Fn(int n, fbm::Hurst h, std::uint64_t seed);

/// Weighted quadratic variation
/// F_n = n^{2H - 1/2} sum_k f(B_{k/n}) [ (Delta B_{k/n})^2 - n^{-2H} ]
/// on the exact uniform grid {0, 1/n, ..., 1}.
double weighted_qv_Fn(const fbm::FbmPath& path, const WeightFunction& f, fbm::Hurst h);

/// Coupled limit draw sqrt(sigma_H) * sqrt((1/n) sum_k f^2(B_{k/n})) * eta.
/// At H = 1/2 this is sqrt(2 int f^2) * eta.
double weighted_limit_sample(const fbm::FbmPath& path, const WeightFunction& f, fbm::Hurst h,
                             double eta);

/// Stream tag for auxiliary draws (the independent eta) so they never
/// collide with path draws of the same replica.
inline constexpr std::uint64_t kEtaStreamTag = 0x9d2c5680e5b9ca17ULL;

}  // namespace stable::functionals
