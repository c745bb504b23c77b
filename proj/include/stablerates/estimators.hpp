#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stablerates/chaos.hpp"
#include "stablerates/fbm.hpp"
#include "stablerates/functionals.hpp"
#include "stablerates/stats.hpp"

namespace stable::estimators {

/// Monte Carlo estimates of the Theorem 3.4 ingredients.
struct BoundIngredients {
  double e_inner_uDF_minus_S2 = 0.0;  // E|<u, DF> - S^2|
  double e_inner_uDS2 = 0.0;          // E|<u, DS^2>|
  double e_abs_F = 0.0;               // E|F|
  double e_S = 0.0;                   // E[S]
  std::array<double, 4> std_errors{};
};

/// Assembled distance-bound report at one level n.
struct BoundReport {
  int n = 0;
  double delta = 0.0;
  double kolmogorov_bound = 0.0;
  double alpha = 0.0;
  std::optional<double> tv_bound;
  std::string provenance;  // "analytic" | "monte_carlo"
};

/// Delta = 3 Phi2^{1/3} max{Phi2, sqrt(2/pi)(2 + E[S] + E|F|)}^{2/3},
/// Phi2 = E|<u,DF>-S^2|/sqrt(2 pi) + (sqrt(2)/3) E|<u,DS^2>|.
double delta_bound(const BoundIngredients& ing);

/// d_Kol <= Delta^{alpha/(alpha+1)} (1 + E|S|^{-alpha}), alpha in (0,1].
double kolmogorov_transfer(double delta, double alpha, double e_S_neg_alpha);

/// d_TV <= c d_W^{1/(1+2p)} for variables in the first p chaoses.
double tv_transfer(double d, int p, double c);

/// Closed form E|S|^{-alpha} for S = c_H |B_1|:
/// c_H^{-alpha} 2^{-alpha/2} Gamma((1-alpha)/2) / Gamma(1/2), alpha < 1.
double s_neg_alpha_moment(double alpha, fbm::Hurst h);

/// Proposition 3.6 ingredient estimator (H = 1/2). Simulation grid has
/// grid_factor * n steps (resolution guard: grid_factor >= 8). The inner
/// stochastic integral int_s^1 t^n dB_t is a backward partial sum on the
/// same grid.
BoundIngredients estimate_prop36_ingredients(int n, int replicas, std::uint64_t seed,
                                             int threads = 1, int grid_factor = 8);

/// The five weighted-QV expectations of the Proposition 6.1/6.2 proofs:
///   0: E|<u, D^2 F>     - sigma_H * mean f^2(B)|
///   1: E|<u, (DF)x2>|
///   2: E|<u, (DS^2)x2>|
///   3: E|<u, D^2 S^2>|
///   4: E|<u, DF x DS^2>|
/// All indicator inner products are closed-form; ds-integrals are grid
/// averages. S^2 is the sigma_H-scaled grid average of f^2 so that H = 1/2
/// reproduces the Brownian case S^2 = 2 int f^2 exactly.
struct WeightedQvTerms {
  int n = 0;
  std::array<stats::MeanSe, 5> terms;
  static const std::array<const char*, 5> names;
};

WeightedQvTerms estimate_weighted_qv_terms(int n, const functionals::WeightFunction& f,
                                           fbm::Hurst h, int replicas, std::uint64_t seed,
                                           int threads = 1);

// ---------------------------------------------------------------------------
// Theorem 5.1 bound assembly
// ---------------------------------------------------------------------------

/// Derivative-order tuple over (y_1..y_m; x_1..x_d), length m + d.
using DerivOrders = std::vector<int>;

/// Key of one (w2) expectation: component k (0-based), position of beta in
/// enumerate_B0(q_k, m, d), and the l-tuple.
struct TermKey {
  int k = 0;
  std::size_t beta_index = 0;
  std::vector<int> ls;
  bool operator<(const TermKey& o) const {
    if (k != o.k) return k < o.k;
    if (beta_index != o.beta_index) return beta_index < o.beta_index;
    return ls < o.ls;
  }
};

/// (w1) second-derivative expectations: (k, j) -> E|<D^{q_k}F_j, u_k> - 1_{j=k} S_j^2|.
using SecondDerivTerms = std::map<std::pair<int, int>, double>;

/// Weighted sum (w1) + (w2) of Theorem 5.1. phi_norms must cover every
/// derivative tuple the enumeration requests; a missing key raises an error
/// naming the absent tuple. Coefficients are exact rationals (including the
/// Beta factor) converted to double at the end.
double assemble_theorem51_bound(const std::vector<int>& q_list, int d, int m,
                                const std::map<DerivOrders, double>& phi_norms,
                                const std::map<TermKey, double>& term_estimates,
                                const SecondDerivTerms& second_deriv_terms);

/// Derivative tuple requested by one (w2) entry: y_l order a_l; x_j order
/// sum_i (b'_{ij} + b''_{ij}) + |b''_{.j}| - 2 l_j + 1_{j=k}.
DerivOrders theorem51_deriv_orders(int k, const chaos::MultiIndexBeta& beta,
                                   std::span<const int> ls);

}  // namespace stable::estimators
