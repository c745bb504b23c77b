#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace stable::chaos {

using Rational = boost::rational<long long>;

/// Probabilists' Hermite polynomial H_q(x) via the three-term recurrence.
double hermite(int q, double x);

/// Coefficients of eta^k = sum_j c_j H_{k-2j}(eta), c_j = k!/(2^j (k-2j)! j!).
/// Returned as exact integers, j = 0..floor(k/2).
std::vector<long long> hermite_expand_power(int k);

/// Gauss-Hermite quadrature for the standard normal weight: sum w_i g(x_i)
/// approximates E[g(eta)], eta ~ N(0,1). Nodes are roots of the
/// probabilists' Hermite polynomial; weights sum to 1.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussHermite(int n);
  static const GaussHermite& rule200();

  template <typename F>
  double expectation(F&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * g(nodes[i]);
    return acc;
  }
};

/// A smooth function R^d -> R with partial derivatives supplied up to
/// max_order (total order). eval(orders, x) returns the mixed partial
/// derivative with the given per-coordinate orders at x; orders all zero
/// gives the function itself.
struct SmoothFunction {
  int dim = 1;
  int max_order = 0;
  std::function<double(std::span<const int>, std::span<const double>)> eval;
};

/// E[f(alpha_1 eta_1, ..., alpha_d eta_d) eta_1^{k_1} ... eta_d^{k_d}]
/// by the Hermite-expansion identity, with the derivative expectations
/// evaluated by tensorized Gauss-Hermite quadrature (d <= 3).
double gaussian_moment_functional(const SmoothFunction& f, std::span<const double> alphas,
                                  std::span<const int> ks);

/// Same expectation evaluated directly by quadrature of the left-hand side;
/// used as the independent check of the expansion.
double gaussian_moment_direct(const SmoothFunction& f, std::span<const double> alphas,
                              std::span<const int> ks);

// ---------------------------------------------------------------------------
// Multi-index sets
// ---------------------------------------------------------------------------

/// alpha^{(q)} = (k_1..k_q; a_1..a_m; b_{ij}) with
///   k_1 + 2 k_2 + ... + q k_q = q,
///   a_1 + ... + a_m + b_{11} + ... + b_{1d} = k_1,
///   b_{i1} + ... + b_{id} = k_i            (i >= 2).
struct MultiIndexAlpha {
  int q = 0, m = 0, d = 1;
  std::vector<int> k;  // length q
  std::vector<int> a;  // length m
  std::vector<int> b;  // q*d, row-major: b[i*d + j]

  int b_at(int i, int j) const { return b[static_cast<std::size_t>(i * d + j)]; }
};

/// beta^{(q)}: a split b = b' + b'' of an alpha^{(q)}.
struct MultiIndexBeta {
  int q = 0, m = 0, d = 1;
  std::vector<int> k;
  std::vector<int> a;
  std::vector<int> bp;   // b'
  std::vector<int> bpp;  // b''

  MultiIndexAlpha alpha() const;
  int bp_at(int i, int j) const { return bp[static_cast<std::size_t>(i * d + j)]; }
  int bpp_at(int i, int j) const { return bpp[static_cast<std::size_t>(i * d + j)]; }
  int norm_bp() const;          // |b'|
  int norm_bpp() const;         // |b''|
  int norm_bpp_col(int j) const;  // |b''_{.j}|
};

/// Exhaustive, duplicate-free, lexicographically ordered enumerations.
/// Throws std::length_error when the candidate count exceeds 10^6.
std::vector<MultiIndexAlpha> enumerate_A(int q, int m, int d);
std::vector<MultiIndexBeta> enumerate_B(int q, int m, int d);
std::vector<MultiIndexBeta> enumerate_B0(int q, int m, int d);  // b'_{qj} = 0

/// C(alpha) = q! / (prod_i i!^{k_i} prod_l a_l! prod_{ij} b_{ij}!), exact.
Rational coeff_C(const MultiIndexAlpha& alpha);

/// W(beta; l_1..l_d) =
///   C(alpha(beta)) prod_{ij} binom(b'_{ij}+b''_{ij}, b'_{ij})
///                  prod_s |b''_{.s}|! / (2^{l_s} (|b''_{.s}|-2l_s)! l_s!).
Rational coeff_W(const MultiIndexBeta& beta, std::span<const int> ls);

/// Beta function B(u, v) via log-gamma.
double beta_function(double u, double v);

/// Exact rational B(u, v) for u = twice_u/2 a positive half-integer or
/// integer and v a positive integer: B(u,v) = (v-1)! / (u (u+1) ... (u+v-1)).
Rational beta_rational(int twice_u, int v);

/// W_hat = W * B(|b'| + 1/2, |b''| + 1). Exact rational value; callers
/// needing a double convert at the end.
Rational coeff_W_hat_rational(const MultiIndexBeta& beta, std::span<const int> ls);
double coeff_W_hat(const MultiIndexBeta& beta, std::span<const int> ls);

// ---------------------------------------------------------------------------
// Finite-dimensional tensors
// ---------------------------------------------------------------------------

/// Dense real tensor of shape dim^order (row-major). Desk-scale only:
/// dim <= 8, order <= 6.
struct Tensor {
  int order = 0;
  int dim = 1;
  std::vector<double> entries;  // size dim^order; order 0 = scalar

  static Tensor zeros(int order, int dim);
  static Tensor basis_vector(int dim, int i);  // e_i, order 1
  double& at(std::span<const int> idx);
  double at(std::span<const int> idx) const;
  Tensor outer(const Tensor& other) const;
  double norm() const;
};

/// Elements of the symmetric tensor power: produced by symmetrize(), whose
/// output is permutation-invariant (symmetry_defect <= 1e-12).
using SymmetricTensor = Tensor;

/// r-th contraction f (x)_r g: pairs the last r slots of f with the last r
/// slots of g. r = 0 is the tensor product; r = order(f) = order(g) gives
/// the scalar <f, g>.
Tensor contract(const Tensor& f, const Tensor& g, int r);

/// Average over all permutations of the slots.
SymmetricTensor symmetrize(const Tensor& t);

/// Max deviation under slot transpositions (0 for symmetric tensors).
double symmetry_defect(const Tensor& t);

}  // namespace stable::chaos
