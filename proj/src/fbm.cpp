#include "stablerates/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

#include "stablerates/rng.hpp"

namespace stable::fbm {

namespace {
std::mutex fftw_plan_mutex;  // FFTW plan creation is not thread-safe

double pow2h(double x, double two_h) { return std::pow(std::abs(x), two_h); }
}  // namespace

Hurst::Hurst(double value) : h(value) {
  if (!(value > 0.0 && value < 1.0))
    throw std::invalid_argument("Hurst parameter must lie in (0,1)");
}

TimeGrid::TimeGrid(std::vector<double> pts) : points(std::move(pts)) {
  if (points.empty()) throw std::invalid_argument("TimeGrid: empty grid");
  if (points.front() < 0.0) throw std::invalid_argument("TimeGrid: negative time");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1]))
      throw std::invalid_argument("TimeGrid: points must be strictly increasing");
}

TimeGrid TimeGrid::uniform(int n, double horizon) {
  if (n < 1) throw std::invalid_argument("TimeGrid::uniform: n >= 1 required");
  std::vector<double> pts(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) pts[static_cast<std::size_t>(i)] = horizon * i / n;
  return TimeGrid(std::move(pts));
}

bool TimeGrid::is_uniform_from_zero(double rtol) const {
  if (points.size() < 2 || points.front() != 0.0) return false;
  const double h = points[1] - points[0];
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = points[i] - points[i - 1];
    if (std::abs(d - h) > rtol * h) return false;
  }
  return true;
}

double fbm_covariance(double s, double t, Hurst h) {
  if (s < 0.0 || t < 0.0) throw std::invalid_argument("fbm_covariance: negative time");
  const double two_h = 2.0 * h.h;
  return 0.5 * (pow2h(t, two_h) + pow2h(s, two_h) - pow2h(t - s, two_h));
}

double indicator_inner(double a, double b, double c, double d, Hurst h) {
  if (a < 0.0 || c < 0.0) throw std::invalid_argument("indicator_inner: negative endpoint");
  if (a > b || c > d) throw std::invalid_argument("indicator_inner: reversed interval");
  return fbm_covariance(b, d, h) - fbm_covariance(b, c, h) - fbm_covariance(a, d, h) +
         fbm_covariance(a, c, h);
}

double rho_H(long long p, Hurst h) {
  const double ap = std::abs(static_cast<double>(p));
  const double two_h = 2.0 * h.h;
  return 0.5 * (std::pow(ap + 1.0, two_h) + pow2h(ap - 1.0, two_h) - 2.0 * std::pow(ap, two_h));
}

Lemma61Quantities lemma61_quantities(int n, int q, Hurst h) {
  if (h.h >= 0.5) throw std::domain_error("lemma61_quantities: requires H < 1/2");
  if (n < 2) throw std::invalid_argument("lemma61_quantities: n >= 2 required");
  if (q < 1) throw std::invalid_argument("lemma61_quantities: q >= 1 required");

  Lemma61Quantities out{0.0, 0.0, 0.0};

  // sum over lags: beta_{j,k} = n^{-2H} rho_H(j-k)
  const double scale = std::pow(static_cast<double>(n), -2.0 * h.h);
  double s = 0.0, comp = 0.0;
  for (long long p = -(n - 1); p <= n - 1; ++p) {
    const double term =
        static_cast<double>(n - std::llabs(p)) * std::pow(std::abs(scale * rho_H(p, h)), q);
    const double y = term - comp;
    const double t = s + y;
    comp = (t - s) - y;
    s = t;
  }
  out.sum_beta_q = s;

  // sup_t sum_k |<1_{[0,t]}, delta_{k/n}>| over grid points and midpoints
  for (int it = 1; it <= 2 * n; ++it) {
    const double t = 0.5 * it / n;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double a = indicator_inner(0.0, t, k / static_cast<double>(n),
                                       (k + 1) / static_cast<double>(n), h);
      acc += std::abs(a);
      out.max_alpha = std::max(out.max_alpha, std::abs(a));
    }
    out.sup_alpha_sum = std::max(out.sup_alpha_sum, acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PathSampler
// ---------------------------------------------------------------------------

class PathSampler::Workspace {
 public:
  Workspace(int fft_size) : size_(fft_size) {
    if (fft_size > 0) {
      in_ = fftw_alloc_complex(static_cast<std::size_t>(fft_size));
      out_ = fftw_alloc_complex(static_cast<std::size_t>(fft_size));
      std::lock_guard<std::mutex> lock(fftw_plan_mutex);
      plan_ = fftw_plan_dft_1d(fft_size, in_, out_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  ~Workspace() {
    if (size_ > 0) {
      {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(plan_);
      }
      fftw_free(in_);
      fftw_free(out_);
    }
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  int size_ = 0;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_{};
  std::vector<double> scratch;
};

PathSampler::PathSampler(TimeGrid grid, Hurst h) : grid_(std::move(grid)), h_(h) {
  const std::size_t m = grid_.size();
  starts_at_zero_ = grid_.points.front() == 0.0;
  const std::size_t steps = starts_at_zero_ ? m - 1 : m;
  if (steps == 0) return;  // grid {0}: path is identically zero

  if (grid_.is_uniform_from_zero() && m >= 3) {
    // Davies-Harte circulant embedding of the increment covariance.
    const long long n = static_cast<long long>(m - 1);
    spacing_ = grid_.points[1] - grid_.points[0];
    const std::size_t fft = 2 * static_cast<std::size_t>(n);
    std::vector<double> circ(fft);
    for (long long k = 0; k <= n; ++k) circ[static_cast<std::size_t>(k)] = rho_H(k, h_);
    for (long long k = 1; k < n; ++k)
      circ[fft - static_cast<std::size_t>(k)] = circ[static_cast<std::size_t>(k)];

    // eigenvalues of the circulant = real DFT of the first row
    fftw_complex* in = fftw_alloc_complex(fft);
    fftw_complex* out = fftw_alloc_complex(fft);
    for (std::size_t i = 0; i < fft; ++i) {
      in[i][0] = circ[i];
      in[i][1] = 0.0;
    }
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex);
      fftw_plan p = fftw_plan_dft_1d(static_cast<int>(fft), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
      fftw_execute(p);
      fftw_destroy_plan(p);
    }
    double max_eig = 0.0, min_eig = 0.0;
    for (std::size_t i = 0; i < fft; ++i) {
      max_eig = std::max(max_eig, out[i][0]);
      min_eig = std::min(min_eig, out[i][0]);
    }
    if (min_eig >= -1e-8 * max_eig) {
      // tiny negatives are numerical noise: clip at 0
      sqrt_eigs_.resize(fft);
      for (std::size_t i = 0; i < fft; ++i)
        sqrt_eigs_[i] = std::sqrt(std::max(out[i][0], 0.0));
      circulant_ = true;
    } else {
      cholesky_fallback_ = true;  // embedding rejected
    }
    fftw_free(in);
    fftw_free(out);
    if (circulant_) return;
  }

  // Dense Cholesky of the covariance at the positive grid points.
  std::vector<double> pos;
  pos.reserve(m);
  for (double t : grid_.points)
    if (t > 0.0) pos.push_back(t);
  const Eigen::Index k = static_cast<Eigen::Index>(pos.size());
  Eigen::MatrixXd cov(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = fbm_covariance(pos[static_cast<std::size_t>(i)],
                                      pos[static_cast<std::size_t>(j)], h_);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * cov.trace() / static_cast<double>(k);
    cov.diagonal().array() += jitter;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("sample_path: covariance not PSD after jitter");
  }
  chol_ = llt.matrixL();
}

PathSampler::~PathSampler() = default;

void PathSampler::WorkspaceDeleter::operator()(Workspace* ws) const { delete ws; }

PathSampler::WorkspacePtr PathSampler::make_workspace() const {
  const int fft = circulant_ ? static_cast<int>(sqrt_eigs_.size()) : 0;
  return WorkspacePtr(new Workspace(fft));
}

void PathSampler::sample(std::uint64_t master_seed, std::uint64_t replica, Workspace& ws,
                         std::span<double> out) const {
  const std::size_t m = grid_.size();
  if (out.size() != m) throw std::invalid_argument("sample: output size mismatch");
  rng::ReplicaRng gen(master_seed, replica);

  if (m == 1) {
    out[0] = starts_at_zero_ ? 0.0 : gen.normal() * std::sqrt(fbm_covariance(
                                          grid_.points[0], grid_.points[0], h_));
    return;
  }

  if (circulant_) {
    const std::size_t n = m - 1;
    const std::size_t fft = 2 * n;
    // Hermitian-symmetric frequency-domain draw; real part of the inverse
    // transform has the target stationary covariance.
    ws.in_[0][0] = gen.normal() * sqrt_eigs_[0];
    ws.in_[0][1] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const double re = gen.normal() * M_SQRT1_2;
      const double im = gen.normal() * M_SQRT1_2;
      ws.in_[k][0] = re * sqrt_eigs_[k];
      ws.in_[k][1] = im * sqrt_eigs_[k];
      ws.in_[fft - k][0] = ws.in_[k][0];
      ws.in_[fft - k][1] = -ws.in_[k][1];
    }
    ws.in_[n][0] = gen.normal() * sqrt_eigs_[n];
    ws.in_[n][1] = 0.0;
    fftw_execute(ws.plan_);
    const double norm = 1.0 / std::sqrt(static_cast<double>(fft));
    const double inc_scale = std::pow(spacing_, h_.h) * norm;
    double acc = 0.0;
    out[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += ws.out_[k][0] * inc_scale;
      out[k + 1] = acc;
    }
    return;
  }

  // dense route
  const Eigen::Index k = chol_.rows();
  ws.scratch.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) ws.scratch[static_cast<std::size_t>(i)] = gen.normal();
  Eigen::Map<const Eigen::VectorXd> z(ws.scratch.data(), k);
  Eigen::VectorXd vals = chol_.triangularView<Eigen::Lower>() * z;
  std::size_t j = 0;
  for (std::size_t i = 0; i < m; ++i)
    out[i] = grid_.points[i] > 0.0 ? vals(static_cast<Eigen::Index>(j++)) : 0.0;
}

FbmPath sample_path(const TimeGrid& grid, Hurst h, std::uint64_t seed) {
  PathSampler sampler(grid, h);
  auto ws = sampler.make_workspace();
  FbmPath path{grid, std::vector<double>(grid.size()), h, seed,
               sampler.used_cholesky_fallback()};
  sampler.sample(seed, 0, *ws, path.values);
  return path;
}

// ---------------------------------------------------------------------------
// Refinement order and ClusterSampler
// ---------------------------------------------------------------------------

std::vector<int> refinement_order(int m) {
  if (m < 1 || (m & (m - 1)) != 0)
    throw std::invalid_argument("refinement_order: m must be a power of two");
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(m) + 1);
  order.push_back(0);
  order.push_back(m);
  for (int step = m; step > 1; step /= 2)
    for (int i = step / 2; i < m; i += step) order.push_back(i);
  return order;
}

ClusterSampler::ClusterSampler(std::vector<double> times_in_order, Hurst h)
    : times_(std::move(times_in_order)), h_(h) {
  const int m = static_cast<int>(times_.size());
  if (m == 0) throw std::invalid_argument("ClusterSampler: empty point set");
  for (double t : times_)
    if (t <= 0.0) throw std::invalid_argument("ClusterSampler: points must be positive times");

  if (h_.h == 0.5) {
    // Markov bridge fill-in: each point conditions only on the nearest
    // already-sampled bracketing points (plus B_0 = 0 on the left).
    brownian_ = true;
    bridge_.resize(static_cast<std::size_t>(m));
    // sorted view over already-inserted points
    std::vector<int> inserted;  // indices into times_, kept sorted by time
    for (int i = 0; i < m; ++i) {
      const double t = times_[static_cast<std::size_t>(i)];
      auto cmp = [&](int a, double v) { return times_[static_cast<std::size_t>(a)] < v; };
      auto it = std::lower_bound(inserted.begin(), inserted.end(), t, cmp);
      BridgeNode node;
      const bool has_right = it != inserted.end();
      const bool has_left = it != inserted.begin();
      const int right = has_right ? *it : -1;
      const int left = has_left ? *(it - 1) : -1;
      const double tl = has_left ? times_[static_cast<std::size_t>(left)] : 0.0;
      if (has_right) {
        const double tr = times_[static_cast<std::size_t>(right)];
        node.left = left;
        node.right = right;
        node.w_left = (tr - t) / (tr - tl);
        node.w_right = (t - tl) / (tr - tl);
        node.sd = std::sqrt((t - tl) * (tr - t) / (tr - tl));
      } else {
        node.left = left;
        node.right = -1;
        node.w_left = 1.0;
        node.sd = std::sqrt(t - tl);
      }
      bridge_[static_cast<std::size_t>(i)] = node;
      inserted.insert(it, i);
    }
    return;
  }

  Eigen::MatrixXd cov(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = fbm_covariance(times_[static_cast<std::size_t>(i)],
                                      times_[static_cast<std::size_t>(j)], h_);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-12 * cov.trace() / m;
    cov.diagonal().array() += jitter;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("ClusterSampler: covariance not PSD after jitter");
  }
  chol_ = llt.matrixL();
}

void ClusterSampler::sample_block(std::uint64_t master_seed, std::uint64_t first_replica,
                                  int count, Eigen::MatrixXd& out) const {
  const int m = size();
  if (count < 1 || count > kBlock)
    throw std::invalid_argument("sample_block: count must be in [1, kBlock]");

  if (brownian_) {
    out.resize(m, count);
    for (int c = 0; c < count; ++c) {
      rng::ReplicaRng gen(master_seed, first_replica + static_cast<std::uint64_t>(c));
      for (int i = 0; i < m; ++i) {
        const BridgeNode& nd = bridge_[static_cast<std::size_t>(i)];
        const double bl = nd.left >= 0 ? out(nd.left, c) : 0.0;
        double mean = nd.w_left * bl;
        if (nd.right >= 0) mean += nd.w_right * out(nd.right, c);
        out(i, c) = mean + nd.sd * gen.normal();
      }
    }
    return;
  }

  // Fixed-width GEMM: identical blocking for every call keeps per-column
  // arithmetic independent of count, hence thread-count invariant.
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(m, kBlock);
  for (int c = 0; c < count; ++c) {
    rng::ReplicaRng gen(master_seed, first_replica + static_cast<std::uint64_t>(c));
    for (int i = 0; i < m; ++i) z(i, c) = gen.normal();
  }
  Eigen::MatrixXd full = chol_.triangularView<Eigen::Lower>() * z;
  out = full.leftCols(count);
}

}  // namespace stable::fbm
