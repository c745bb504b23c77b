#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stable::fbm {

/// Hurst parameter, constrained to (0,1).
struct Hurst {
  double h;
  explicit Hurst(double value);
};

/// Strictly increasing time grid on [0, T], first point >= 0.
struct TimeGrid {
  std::vector<double> points;

  explicit TimeGrid(std::vector<double> pts);
  static TimeGrid uniform(int n, double horizon = 1.0);  // {0, T/n, ..., T}
  std::size_t size() const { return points.size(); }
  double horizon() const { return points.back(); }
  bool is_uniform_from_zero(double rtol = 1e-12) const;
};

/// One realized fBm sample path on a grid.
struct FbmPath {
  TimeGrid grid;
  std::vector<double> values;
  Hurst hurst;
  std::uint64_t seed;
  bool cholesky_fallback = false;  // set when circulant embedding was rejected
};

/// Covariance E(B_s B_t) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(double s, double t, Hurst h);

/// <1_{[a,b]}, 1_{[c,d]}>_H by bilinearity of the covariance.
double indicator_inner(double a, double b, double c, double d, Hurst h);

/// Correlation kernel of unit-lag increments:
/// rho_H(p) = (|p+1|^{2H} + |p-1|^{2H} - 2|p|^{2H}) / 2.
double rho_H(long long p, Hurst h);

struct Lemma61Quantities {
  double sum_beta_q;     // sum_{k,j} |<delta_{j/n}, delta_{k/n}>|^q
  double sup_alpha_sum;  // sup_t sum_k |<1_{[0,t]}, delta_{k/n}>| on grid+midpoints
  double max_alpha;      // max_{k,t} |<1_{[0,t]}, delta_{k/n}>|
};

/// Discrete inner-product quantities for H < 1/2 (sup over grid points and
/// midpoints).
Lemma61Quantities lemma61_quantities(int n, int q, Hurst h);

/// Reusable sampler for a fixed (grid, H): circulant embedding of the
/// increment covariance for uniform grids starting at 0, dense Cholesky
/// otherwise. Thread-safe once constructed; each thread owns a Workspace.
class PathSampler {
 public:
  PathSampler(TimeGrid grid, Hurst h);
  ~PathSampler();
  PathSampler(const PathSampler&) = delete;
  PathSampler& operator=(const PathSampler&) = delete;

  class Workspace;
  struct WorkspaceDeleter {
    void operator()(Workspace* ws) const;
  };
  using WorkspacePtr = std::unique_ptr<Workspace, WorkspaceDeleter>;
  WorkspacePtr make_workspace() const;

  /// Fills `out` (size grid.size()) with path values; draws come from the
  /// stream (master_seed, replica).
  void sample(std::uint64_t master_seed, std::uint64_t replica, Workspace& ws,
              std::span<double> out) const;

  bool used_cholesky_fallback() const { return cholesky_fallback_; }
  const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  Hurst h_;
  bool circulant_ = false;
  bool cholesky_fallback_ = false;
  bool starts_at_zero_ = false;
  std::vector<double> sqrt_eigs_;  // circulant route
  double spacing_ = 0.0;
  Eigen::MatrixXd chol_;           // dense route (lower factor)
  friend class Workspace;
};

/// Single-shot convenience wrapper around PathSampler.
FbmPath sample_path(const TimeGrid& grid, Hurst h, std::uint64_t seed);

/// Indices 0..m enumerated coarse-to-fine (dyadic levels: {0,m}, {m/2},
/// {m/4,3m/4}, ...). Doubling m appends the new level after all old points,
/// so draws on nested grids are coupled. m must be a power of two.
std::vector<int> refinement_order(int m);

/// Gaussian sampler for an arbitrary point set given in *sampling order*
/// (need not be sorted). Dense Cholesky of the covariance in that order;
/// H = 1/2 uses the Markov bridge fill-in instead. Supports batched
/// generation so that replicas amortize the triangular multiply.
class ClusterSampler {
 public:
  ClusterSampler(std::vector<double> times_in_order, Hurst h);

  int size() const { return static_cast<int>(times_.size()); }

  /// out is (size() x count), column c = replica (first_replica + c).
  /// Each column consumes exactly size() normals from its replica stream;
  /// the stream is returned positioned after those draws via `draws_used`.
  void sample_block(std::uint64_t master_seed, std::uint64_t first_replica,
                    int count, Eigen::MatrixXd& out) const;

  static constexpr int kBlock = 64;  // fixed GEMM width, zero-padded

 private:
  std::vector<double> times_;
  Hurst h_;
  bool brownian_ = false;
  Eigen::MatrixXd chol_;
  // Brownian bridge fill-in data: for each point, indices of bracketing
  // already-sampled points (-1 = none) and conditional mean weights/sd.
  struct BridgeNode {
    int left = -1, right = -1;
    double w_left = 0.0, w_right = 0.0, sd = 0.0;
  };
  std::vector<BridgeNode> bridge_;
};

}  // namespace stable::fbm
