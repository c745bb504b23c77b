#include "stablerates/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace stable::chaos {

namespace {

constexpr std::size_t kEnumBudget = 1'000'000;

long long factorial_ll(int n) {
  long long r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

long long binom_ll(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

// All nonnegative integer vectors of given length summing to total, in
// lexicographic order.
void compositions(int total, int length, std::vector<int>& current,
                  const std::function<void(const std::vector<int>&)>& emit) {
  if (length == 0) {
    if (total == 0) emit(current);
    return;
  }
  for (int v = 0; v <= total; ++v) {
    current.push_back(v);
    compositions(total - v, length - 1, current, emit);
    current.pop_back();
  }
}

}  // namespace

double hermite(int q, double x) {
  if (q < 0) throw std::invalid_argument("hermite: negative order");
  if (q == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int i = 1; i < q; ++i) {
    const double next = x * cur - i * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<long long> hermite_expand_power(int k) {
  if (k < 0) throw std::invalid_argument("hermite_expand_power: negative power");
  if (k > 20) throw std::invalid_argument("hermite_expand_power: k too large for exact int64");
  std::vector<long long> coeffs;
  for (int j = 0; j <= k / 2; ++j) {
    long long c = factorial_ll(k) / ((1LL << j) * factorial_ll(k - 2 * j) * factorial_ll(j));
    coeffs.push_back(c);
  }
  return coeffs;
}

GaussHermite::GaussHermite(int n) {
  if (n < 1) throw std::invalid_argument("GaussHermite: need at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family:
  // diagonal 0, off-diagonal sqrt(k).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double off = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = off;
    J(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = v0 * v0;  // total weight normalized to 1
  }
}

const GaussHermite& GaussHermite::rule200() {
  static const GaussHermite rule(200);
  return rule;
}

namespace {

// E[ d^orders f (alpha_1 eta_1, ...) ] by tensorized Gauss-Hermite.
double derivative_expectation(const SmoothFunction& f, std::span<const double> alphas,
                              std::span<const int> orders) {
  const int d = f.dim;
  if (d > 3) throw std::invalid_argument("gaussian moment: tensorized quadrature supports d <= 3");
  const auto& gh = GaussHermite::rule200();
  std::vector<double> x(static_cast<std::size_t>(d));
  double acc = 0.0;
  if (d == 1) {
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      x[0] = alphas[0] * gh.nodes[i];
      acc += gh.weights[i] * f.eval(orders, x);
    }
    return acc;
  }
  if (d == 2) {
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
        x[0] = alphas[0] * gh.nodes[i];
        x[1] = alphas[1] * gh.nodes[j];
        acc += gh.weights[i] * gh.weights[j] * f.eval(orders, x);
      }
    return acc;
  }
  for (std::size_t i = 0; i < gh.nodes.size(); ++i)
    for (std::size_t j = 0; j < gh.nodes.size(); ++j)
      for (std::size_t l = 0; l < gh.nodes.size(); ++l) {
        x[0] = alphas[0] * gh.nodes[i];
        x[1] = alphas[1] * gh.nodes[j];
        x[2] = alphas[2] * gh.nodes[l];
        acc += gh.weights[i] * gh.weights[j] * gh.weights[l] * f.eval(orders, x);
      }
  return acc;
}

}  // namespace

double gaussian_moment_functional(const SmoothFunction& f, std::span<const double> alphas,
                                  std::span<const int> ks) {
  const int d = f.dim;
  if (static_cast<int>(alphas.size()) != d || static_cast<int>(ks.size()) != d)
    throw std::invalid_argument("gaussian_moment_functional: dimension mismatch");
  int total = 0;
  for (int k : ks) {
    if (k < 0) throw std::invalid_argument("gaussian_moment_functional: negative moment order");
    total += k;
  }
  if (f.max_order < total)
    throw std::invalid_argument("gaussian_moment_functional: derivatives up to order " +
                                std::to_string(total) + " required");

  // eta^k = sum_j c_{k,j} H_{k-2j}(eta) and
  // E[g(alpha eta) H_p(eta)] = alpha^p E[g^{(p)}(alpha eta)], coordinatewise.
  std::vector<std::vector<long long>> coeffs;
  coeffs.reserve(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) coeffs.push_back(hermite_expand_power(ks[static_cast<std::size_t>(l)]));

  std::vector<int> js(static_cast<std::size_t>(d), 0);
  std::vector<int> orders(static_cast<std::size_t>(d), 0);
  double acc = 0.0;
  for (;;) {
    double w = 1.0;
    for (int l = 0; l < d; ++l) {
      const int kl = ks[static_cast<std::size_t>(l)];
      const int jl = js[static_cast<std::size_t>(l)];
      const int p = kl - 2 * jl;
      orders[static_cast<std::size_t>(l)] = p;
      w *= static_cast<double>(coeffs[static_cast<std::size_t>(l)][static_cast<std::size_t>(jl)]) *
           std::pow(alphas[static_cast<std::size_t>(l)], p);
    }
    acc += w * derivative_expectation(f, alphas, orders);
    int l = 0;
    for (; l < d; ++l) {
      if (2 * (js[static_cast<std::size_t>(l)] + 1) <= ks[static_cast<std::size_t>(l)]) {
        ++js[static_cast<std::size_t>(l)];
        std::fill(js.begin(), js.begin() + l, 0);
        break;
      }
    }
    if (l == d) break;
  }
  return acc;
}

double gaussian_moment_direct(const SmoothFunction& f, std::span<const double> alphas,
                              std::span<const int> ks) {
  const int d = f.dim;
  if (static_cast<int>(alphas.size()) != d || static_cast<int>(ks.size()) != d)
    throw std::invalid_argument("gaussian_moment_direct: dimension mismatch");
  const auto& gh = GaussHermite::rule200();
  const std::vector<int> zero(static_cast<std::size_t>(d), 0);
  std::vector<double> x(static_cast<std::size_t>(d));
  double acc = 0.0;
  if (d == 1) {
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      x[0] = alphas[0] * gh.nodes[i];
      acc += gh.weights[i] * f.eval(zero, x) * std::pow(gh.nodes[i], ks[0]);
    }
    return acc;
  }
  if (d == 2) {
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
        x[0] = alphas[0] * gh.nodes[i];
        x[1] = alphas[1] * gh.nodes[j];
        acc += gh.weights[i] * gh.weights[j] * f.eval(zero, x) *
               std::pow(gh.nodes[i], ks[0]) * std::pow(gh.nodes[j], ks[1]);
      }
    return acc;
  }
  if (d == 3) {
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      for (std::size_t j = 0; j < gh.nodes.size(); ++j)
        for (std::size_t l = 0; l < gh.nodes.size(); ++l) {
          x[0] = alphas[0] * gh.nodes[i];
          x[1] = alphas[1] * gh.nodes[j];
          x[2] = alphas[2] * gh.nodes[l];
          acc += gh.weights[i] * gh.weights[j] * gh.weights[l] * f.eval(zero, x) *
                 std::pow(gh.nodes[i], ks[0]) * std::pow(gh.nodes[j], ks[1]) *
                 std::pow(gh.nodes[l], ks[2]);
        }
    return acc;
  }
  throw std::invalid_argument("gaussian_moment_direct: d <= 3");
}

// ---------------------------------------------------------------------------
// Multi-index sets
// ---------------------------------------------------------------------------

MultiIndexAlpha MultiIndexBeta::alpha() const {
  MultiIndexAlpha out;
  out.q = q;
  out.m = m;
  out.d = d;
  out.k = k;
  out.a = a;
  out.b.resize(bp.size());
  for (std::size_t i = 0; i < bp.size(); ++i) out.b[i] = bp[i] + bpp[i];
  return out;
}

int MultiIndexBeta::norm_bp() const { return std::accumulate(bp.begin(), bp.end(), 0); }
int MultiIndexBeta::norm_bpp() const { return std::accumulate(bpp.begin(), bpp.end(), 0); }
int MultiIndexBeta::norm_bpp_col(int j) const {
  int s = 0;
  for (int i = 0; i < q; ++i) s += bpp_at(i, j);
  return s;
}

std::vector<MultiIndexAlpha> enumerate_A(int q, int m, int d) {
  if (q < 1 || m < 0 || d < 1) throw std::invalid_argument("enumerate_A: invalid (q, m, d)");
  std::vector<MultiIndexAlpha> out;
  std::size_t candidates = 0;

  // k-vectors with k_1 + 2 k_2 + ... + q k_q = q, lexicographic.
  std::vector<int> k(static_cast<std::size_t>(q), 0);
  std::function<void(int, int)> rec_k = [&](int idx, int remaining) {
    if (idx == q) {
      if (remaining != 0) return;
      // rows: (a, b_1.) for i = 1 (sum k_1); b_i. for i >= 2 (sum k_i)
      std::vector<std::vector<int>> first_rows;
      std::vector<int> cur;
      compositions(k[0], m + d, cur, [&](const std::vector<int>& v) { first_rows.push_back(v); });
      std::vector<std::vector<std::vector<int>>> later_rows(static_cast<std::size_t>(q));
      for (int i = 1; i < q; ++i) {
        cur.clear();
        compositions(k[static_cast<std::size_t>(i)], d, cur, [&](const std::vector<int>& v) {
          later_rows[static_cast<std::size_t>(i)].push_back(v);
        });
      }
      std::size_t combo = first_rows.size();
      for (int i = 1; i < q; ++i) combo *= later_rows[static_cast<std::size_t>(i)].size();
      candidates += combo;
      if (candidates > kEnumBudget)
        throw std::length_error("enumerate_A: candidate budget of 10^6 exceeded");

      std::vector<std::size_t> pick(static_cast<std::size_t>(q), 0);
      for (;;) {
        MultiIndexAlpha alpha;
        alpha.q = q;
        alpha.m = m;
        alpha.d = d;
        alpha.k = k;
        const auto& fr = first_rows[pick[0]];
        alpha.a.assign(fr.begin(), fr.begin() + m);
        alpha.b.assign(static_cast<std::size_t>(q) * static_cast<std::size_t>(d), 0);
        for (int j = 0; j < d; ++j) alpha.b[static_cast<std::size_t>(j)] = fr[static_cast<std::size_t>(m + j)];
        for (int i = 1; i < q; ++i)
          for (int j = 0; j < d; ++j)
            alpha.b[static_cast<std::size_t>(i * d + j)] =
                later_rows[static_cast<std::size_t>(i)][pick[static_cast<std::size_t>(i)]][static_cast<std::size_t>(j)];
        out.push_back(std::move(alpha));
        int i = q - 1;
        for (; i >= 0; --i) {
          const std::size_t limit = i == 0 ? first_rows.size() : later_rows[static_cast<std::size_t>(i)].size();
          if (pick[static_cast<std::size_t>(i)] + 1 < limit) {
            ++pick[static_cast<std::size_t>(i)];
            std::fill(pick.begin() + i + 1, pick.end(), 0);
            break;
          }
        }
        if (i < 0) break;
      }
      return;
    }
    const int weight = idx + 1;
    for (int v = 0; v * weight <= remaining; ++v) {
      k[static_cast<std::size_t>(idx)] = v;
      rec_k(idx + 1, remaining - v * weight);
    }
    k[static_cast<std::size_t>(idx)] = 0;
  };
  rec_k(0, q);
  return out;
}

namespace {

std::vector<MultiIndexBeta> enumerate_B_impl(int q, int m, int d, bool restrict_last_row) {
  const auto alphas = enumerate_A(q, m, d);
  std::vector<MultiIndexBeta> out;
  std::size_t candidates = 0;
  for (const auto& alpha : alphas) {
    const std::size_t cells = alpha.b.size();
    std::size_t splits = 1;
    for (std::size_t c = 0; c < cells; ++c) {
      const bool fixed = restrict_last_row && c >= static_cast<std::size_t>((q - 1) * d);
      splits *= fixed ? 1 : static_cast<std::size_t>(alpha.b[c] + 1);
    }
    candidates += splits;
    if (candidates > kEnumBudget)
      throw std::length_error("enumerate_B: candidate budget of 10^6 exceeded");

    std::vector<int> bp(cells, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t c) {
      if (c == cells) {
        MultiIndexBeta beta;
        beta.q = q;
        beta.m = m;
        beta.d = d;
        beta.k = alpha.k;
        beta.a = alpha.a;
        beta.bp = bp;
        beta.bpp.resize(cells);
        for (std::size_t i = 0; i < cells; ++i) beta.bpp[i] = alpha.b[i] - bp[i];
        out.push_back(std::move(beta));
        return;
      }
      const bool fixed = restrict_last_row && c >= static_cast<std::size_t>((q - 1) * d);
      const int top = fixed ? 0 : alpha.b[c];
      for (int v = 0; v <= top; ++v) {
        bp[c] = v;
        rec(c + 1);
      }
      bp[c] = 0;
    };
    rec(0);
  }
  return out;
}

}  // namespace

std::vector<MultiIndexBeta> enumerate_B(int q, int m, int d) {
  return enumerate_B_impl(q, m, d, false);
}

std::vector<MultiIndexBeta> enumerate_B0(int q, int m, int d) {
  return enumerate_B_impl(q, m, d, true);
}

Rational coeff_C(const MultiIndexAlpha& alpha) {
  Rational c(factorial_ll(alpha.q), 1);
  for (int i = 0; i < alpha.q; ++i) {
    const long long fi = factorial_ll(i + 1);
    for (int rep = 0; rep < alpha.k[static_cast<std::size_t>(i)]; ++rep) c /= Rational(fi, 1);
  }
  for (int a : alpha.a) c /= Rational(factorial_ll(a), 1);
  for (int b : alpha.b) c /= Rational(factorial_ll(b), 1);
  return c;
}

Rational coeff_W(const MultiIndexBeta& beta, std::span<const int> ls) {
  if (static_cast<int>(ls.size()) != beta.d)
    throw std::invalid_argument("coeff_W: l-tuple length must equal d");
  for (int s = 0; s < beta.d; ++s) {
    const int top = beta.norm_bpp_col(s) / 2;
    if (ls[static_cast<std::size_t>(s)] < 0 || ls[static_cast<std::size_t>(s)] > top)
      throw std::invalid_argument("coeff_W: l_s out of range [0, floor(|b''_{.s}|/2)]");
  }
  Rational w = coeff_C(beta.alpha());
  for (int i = 0; i < beta.q; ++i)
    for (int j = 0; j < beta.d; ++j)
      w *= Rational(binom_ll(beta.bp_at(i, j) + beta.bpp_at(i, j), beta.bp_at(i, j)), 1);
  for (int s = 0; s < beta.d; ++s) {
    const int nb = beta.norm_bpp_col(s);
    const int l = ls[static_cast<std::size_t>(s)];
    w *= Rational(factorial_ll(nb), (1LL << l) * factorial_ll(nb - 2 * l) * factorial_ll(l));
  }
  return w;
}

double beta_function(double u, double v) {
  if (!(u > 0.0) || !(v > 0.0)) throw std::domain_error("beta_function: arguments must be positive");
  return std::exp(std::lgamma(u) + std::lgamma(v) - std::lgamma(u + v));
}

Rational beta_rational(int twice_u, int v) {
  if (twice_u <= 0 || v <= 0) throw std::domain_error("beta_rational: arguments must be positive");
  // B(u, v) = (v-1)! / (u (u+1) ... (u+v-1)); with u = twice_u/2 each factor
  // is (twice_u + 2i)/2.
  Rational r(factorial_ll(v - 1), 1);
  for (int i = 0; i < v; ++i) r /= Rational(twice_u + 2 * i, 2);
  return r;
}

Rational coeff_W_hat_rational(const MultiIndexBeta& beta, std::span<const int> ls) {
  const Rational w = coeff_W(beta, ls);
  return w * beta_rational(2 * beta.norm_bp() + 1, beta.norm_bpp() + 1);
}

double coeff_W_hat(const MultiIndexBeta& beta, std::span<const int> ls) {
  const Rational r = coeff_W_hat_rational(beta, ls);
  return boost::rational_cast<double>(r);
}

// ---------------------------------------------------------------------------
// Tensors
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxDim = 8;
constexpr int kMaxOrder = 6;

std::size_t ipow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

void check_tensor_limits(int order, int dim) {
  if (order < 0 || order > kMaxOrder)
    throw std::invalid_argument("Tensor: order must be in [0, 6]");
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Tensor: dim must be in [1, 8]");
}

}  // namespace

Tensor Tensor::zeros(int order, int dim) {
  check_tensor_limits(order, dim);
  Tensor t;
  t.order = order;
  t.dim = dim;
  t.entries.assign(ipow(dim, order), 0.0);
  return t;
}

Tensor Tensor::basis_vector(int dim, int i) {
  Tensor t = zeros(1, dim);
  t.entries[static_cast<std::size_t>(i)] = 1.0;
  return t;
}

double& Tensor::at(std::span<const int> idx) {
  std::size_t flat = 0;
  for (int i : idx) flat = flat * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i);
  return entries[flat];
}

double Tensor::at(std::span<const int> idx) const {
  std::size_t flat = 0;
  for (int i : idx) flat = flat * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i);
  return entries[flat];
}

Tensor Tensor::outer(const Tensor& other) const { return contract(*this, other, 0); }

double Tensor::norm() const {
  double s = 0.0;
  for (double e : entries) s += e * e;
  return std::sqrt(s);
}

Tensor contract(const Tensor& f, const Tensor& g, int r) {
  if (f.dim != g.dim) throw std::invalid_argument("contract: ambient dimension mismatch");
  if (r < 0 || r > std::min(f.order, g.order))
    throw std::invalid_argument("contract: r must be in [0, min(order_f, order_g)]");
  const int out_order = f.order + g.order - 2 * r;
  check_tensor_limits(out_order, f.dim);
  Tensor out = Tensor::zeros(out_order, f.dim);

  const std::size_t rn = ipow(f.dim, r);
  const std::size_t f_lead = ipow(f.dim, f.order - r);
  const std::size_t g_lead = ipow(f.dim, g.order - r);
  // shared slots are the last r of both factors:
  // f flat = lead_f * rn + shared, g flat = lead_g * rn + shared
  for (std::size_t a = 0; a < f_lead; ++a)
    for (std::size_t b = 0; b < g_lead; ++b) {
      double acc = 0.0;
      for (std::size_t s = 0; s < rn; ++s)
        acc += f.entries[a * rn + s] * g.entries[b * rn + s];
      out.entries[a * g_lead + b] = acc;
    }
  return out;
}

SymmetricTensor symmetrize(const Tensor& t) {
  if (t.order <= 1) return t;
  Tensor out = Tensor::zeros(t.order, t.dim);
  std::vector<int> perm(static_cast<std::size_t>(t.order));
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t nperm = 0;
  std::vector<int> idx(static_cast<std::size_t>(t.order));
  std::vector<int> pidx(static_cast<std::size_t>(t.order));
  do {
    ++nperm;
    const std::size_t total = t.entries.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      for (int s = t.order - 1; s >= 0; --s) {
        idx[static_cast<std::size_t>(s)] = static_cast<int>(rest % static_cast<std::size_t>(t.dim));
        rest /= static_cast<std::size_t>(t.dim);
      }
      for (int s = 0; s < t.order; ++s)
        pidx[static_cast<std::size_t>(s)] = idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(s)])];
      out.at(pidx) += t.entries[flat];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& e : out.entries) e /= static_cast<double>(nperm);
  return out;
}

double symmetry_defect(const Tensor& t) {
  if (t.order <= 1) return 0.0;
  double defect = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(t.order));
  std::vector<int> sidx(static_cast<std::size_t>(t.order));
  for (int s1 = 0; s1 < t.order; ++s1)
    for (int s2 = s1 + 1; s2 < t.order; ++s2) {
      for (std::size_t flat = 0; flat < t.entries.size(); ++flat) {
        std::size_t rest = flat;
        for (int s = t.order - 1; s >= 0; --s) {
          idx[static_cast<std::size_t>(s)] = static_cast<int>(rest % static_cast<std::size_t>(t.dim));
          rest /= static_cast<std::size_t>(t.dim);
        }
        sidx = idx;
        std::swap(sidx[static_cast<std::size_t>(s1)], sidx[static_cast<std::size_t>(s2)]);
        defect = std::max(defect, std::abs(t.entries[flat] - t.at(sidx)));
      }
    }
  return defect;
}

}  // namespace stable::chaos
