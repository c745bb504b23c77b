#include "stablerates/estimators.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "stablerates/parallel.hpp"
#include "stablerates/rng.hpp"

namespace stable::estimators {

double delta_bound(const BoundIngredients& ing) {
  if (ing.e_inner_uDF_minus_S2 < 0.0 || ing.e_inner_uDS2 < 0.0 || ing.e_abs_F < 0.0 ||
      ing.e_S < 0.0)
    throw std::invalid_argument("delta_bound: ingredients must be nonnegative");
  const double phi2 = ing.e_inner_uDF_minus_S2 / std::sqrt(2.0 * std::numbers::pi) +
                      std::numbers::sqrt2 / 3.0 * ing.e_inner_uDS2;
  const double phi1 = std::sqrt(2.0 / std::numbers::pi) * (2.0 + ing.e_S + ing.e_abs_F);
  return 3.0 * std::cbrt(phi2) * std::pow(std::max(phi2, phi1), 2.0 / 3.0);
}

double kolmogorov_transfer(double delta, double alpha, double e_S_neg_alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::domain_error("kolmogorov_transfer: alpha must be in (0, 1]");
  if (delta < 0.0) throw std::invalid_argument("kolmogorov_transfer: delta must be nonnegative");
  if (!(e_S_neg_alpha >= 0.0) || !std::isfinite(e_S_neg_alpha))
    throw std::invalid_argument("kolmogorov_transfer: E|S|^-alpha must be finite nonnegative");
  return std::pow(delta, alpha / (alpha + 1.0)) * (1.0 + e_S_neg_alpha);
}

double tv_transfer(double d, int p, double c) {
  if (d < 0.0) throw std::invalid_argument("tv_transfer: distance must be nonnegative");
  if (p < 1) throw std::invalid_argument("tv_transfer: p >= 1 required");
  if (!(c > 0.0)) throw std::invalid_argument("tv_transfer: c must be positive");
  return c * std::pow(d, 1.0 / (1.0 + 2.0 * p));
}

double s_neg_alpha_moment(double alpha, fbm::Hurst h) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::domain_error("s_neg_alpha_moment: requires 0 < alpha < 1");
  const double e_b1 = std::pow(2.0, -alpha / 2.0) *
                      std::tgamma((1.0 - alpha) / 2.0) / std::tgamma(0.5);
  return std::pow(functionals::c_H(h), -alpha) * e_b1;
}

// ---------------------------------------------------------------------------
// Proposition 3.6 ingredients (H = 1/2)
// ---------------------------------------------------------------------------

BoundIngredients estimate_prop36_ingredients(int n, int replicas, std::uint64_t seed, int threads,
                                             int grid_factor) {
  if (n < 1) throw std::invalid_argument("estimate_prop36_ingredients: n >= 1 required");
  if (replicas < 1000)
    throw std::invalid_argument("estimate_prop36_ingredients: replicas >= 1000 required");
  if (grid_factor < 8)
    throw std::invalid_argument("estimate_prop36_ingredients: resolution guard grid >= 8n");

  const int m = grid_factor * n;
  const double dt = 1.0 / m;
  const double sqrt_dt = std::sqrt(dt);
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  // The weights s^n, s^{2n} concentrate in a boundary layer of width ~1/n,
  // so the ds-integrals use exact per-cell weight mass against the
  // endpoint-averaged integrand instead of plain Riemann sums.
  std::vector<double> tn(static_cast<std::size_t>(m) + 1);   // t_k^n
  std::vector<double> wn(static_cast<std::size_t>(m));       // int_cell n s^n ds
  std::vector<double> w2n(static_cast<std::size_t>(m));      // int_cell n s^{2n} ds
  std::vector<double> wsn(static_cast<std::size_t>(m));      // int_cell s^n ds
  for (int k = 0; k <= m; ++k)
    tn[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k) / m, n);
  for (int k = 0; k < m; ++k) {
    const double a = static_cast<double>(k) / m;
    const double b = static_cast<double>(k + 1) / m;
    const double dn1 = std::pow(b, n + 1.0) - std::pow(a, n + 1.0);
    const double d2n1 = std::pow(b, 2.0 * n + 1.0) - std::pow(a, 2.0 * n + 1.0);
    wsn[static_cast<std::size_t>(k)] = dn1 / (n + 1.0);
    wn[static_cast<std::size_t>(k)] = n * wsn[static_cast<std::size_t>(k)];
    w2n[static_cast<std::size_t>(k)] = n * d2n1 / (2.0 * n + 1.0);
  }

  std::vector<double> r_df(static_cast<std::size_t>(replicas));
  std::vector<double> r_ds2(static_cast<std::size_t>(replicas));
  std::vector<double> r_absf(static_cast<std::size_t>(replicas));
  std::vector<double> r_s(static_cast<std::size_t>(replicas));

  parallel::for_replicas(static_cast<std::size_t>(replicas), threads,
                         [&](std::size_t begin, std::size_t end) {
    std::vector<double> b(static_cast<std::size_t>(m) + 1);
    std::vector<double> db(static_cast<std::size_t>(m));
    std::vector<double> back(static_cast<std::size_t>(m) + 1);  // G_k = sum_{j>=k} t_j^n dB_j
    for (std::size_t r = begin; r < end; ++r) {
      rng::ReplicaRng gen(seed, r);
      b[0] = 0.0;
      for (int k = 0; k < m; ++k) {
        db[static_cast<std::size_t>(k)] = sqrt_dt * gen.normal();
        b[static_cast<std::size_t>(k) + 1] = b[static_cast<std::size_t>(k)] + db[static_cast<std::size_t>(k)];
      }
      const double b1 = b[static_cast<std::size_t>(m)];

      back[static_cast<std::size_t>(m)] = 0.0;
      for (int k = m - 1; k >= 0; --k)
        back[static_cast<std::size_t>(k)] = back[static_cast<std::size_t>(k) + 1] +
                                            tn[static_cast<std::size_t>(k)] * db[static_cast<std::size_t>(k)];

      double fn = 0.0;        // sqrt(n) sum t^n B dB (Ito: left values)
      double int_ns2n = 0.0;  // int n s^{2n} B^2 ds
      double int_ncross = 0.0;  // int n s^n B G ds
      double int_sb = 0.0;    // int s^n B ds
      for (int k = 0; k < m; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        fn += tn[ks] * b[ks] * db[ks];
        int_ns2n += w2n[ks] * 0.5 * (b[ks] * b[ks] + b[ks + 1] * b[ks + 1]);
        int_ncross += wn[ks] * 0.5 * (b[ks] * back[ks] + b[ks + 1] * back[ks + 1]);
        int_sb += wsn[ks] * 0.5 * (b[ks] + b[ks + 1]);
      }
      fn *= sqrt_n;

      const double inner_udf = int_ns2n + int_ncross;
      const double s2 = 0.5 * b1 * b1;
      r_df[r] = std::abs(inner_udf - s2);
      r_ds2[r] = std::abs(sqrt_n * b1 * int_sb);
      r_absf[r] = std::abs(fn);
      r_s[r] = std::abs(b1) / std::numbers::sqrt2;
    }
  });

  const auto m_df = stats::mean_se(r_df);
  const auto m_ds2 = stats::mean_se(r_ds2);
  const auto m_absf = stats::mean_se(r_absf);
  const auto m_s = stats::mean_se(r_s);
  BoundIngredients out;
  out.e_inner_uDF_minus_S2 = m_df.mean;
  out.e_inner_uDS2 = m_ds2.mean;
  out.e_abs_F = m_absf.mean;
  out.e_S = m_s.mean;
  out.std_errors = {m_df.se, m_ds2.se, m_absf.se, m_s.se};
  return out;
}

// ---------------------------------------------------------------------------
// Weighted quadratic variation terms
// ---------------------------------------------------------------------------

const std::array<const char*, 5> WeightedQvTerms::names = {
    "uD2F_minus_S2", "uDFx2", "uDS2x2", "uD2S2", "uDFxDS2"};

WeightedQvTerms estimate_weighted_qv_terms(int n, const functionals::WeightFunction& f,
                                           fbm::Hurst h, int replicas, std::uint64_t seed,
                                           int threads) {
  if (!(h.h > 0.25 && h.h <= 0.5))
    throw std::domain_error("estimate_weighted_qv_terms: requires H in (1/4, 1/2]");
  if (f.max_order() < 2)
    throw std::invalid_argument("estimate_weighted_qv_terms: f needs derivatives up to order 2");
  if (n < 2 || n > 4096)
    throw std::invalid_argument("estimate_weighted_qv_terms: n out of supported range [2, 4096]");

  const double H = h.h;
  const double sigma = h.h == 0.5 ? 2.0 : functionals::sigma_H_series(h);
  const double cu = std::pow(static_cast<double>(n), 2.0 * H - 0.5);
  const double neg2h = std::pow(static_cast<double>(n), -2.0 * H);

  // beta_{jk} = <delta_j, delta_k>, alpha_{jk} = <delta_j, 1_{[0,k/n]}>
  Eigen::MatrixXd beta(n, n), alpha(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      beta(j, k) = neg2h * fbm::rho_H(j - k, h);
      alpha(j, k) =
          k == 0 ? 0.0
                 : fbm::indicator_inner(static_cast<double>(j) / n, (j + 1.0) / n, 0.0,
                                        static_cast<double>(k) / n, h);
    }
  }
  const Eigen::MatrixXd beta2 = beta.cwiseProduct(beta);
  const Eigen::MatrixXd beta_alpha = beta.cwiseProduct(alpha);
  const Eigen::MatrixXd alpha2 = alpha.cwiseProduct(alpha);

  const fbm::PathSampler sampler(fbm::TimeGrid::uniform(n), h);

  std::vector<std::array<double, 5>> rows(static_cast<std::size_t>(replicas));

  parallel::for_replicas(static_cast<std::size_t>(replicas), threads,
                         [&](std::size_t begin, std::size_t end) {
    auto ws = sampler.make_workspace();
    std::vector<double> path(static_cast<std::size_t>(n) + 1);
    Eigen::VectorXd fk(n), v1(n), v2(n), w1v(n), w2v(n), gg(n), hh(n);
    for (std::size_t r = begin; r < end; ++r) {
      sampler.sample(seed, r, *ws, path);
      double mean_f2 = 0.0;
      for (int k = 0; k < n; ++k) {
        const double bk = path[static_cast<std::size_t>(k)];
        const double db = path[static_cast<std::size_t>(k) + 1] - bk;
        const double i2 = db * db - neg2h;
        const double f0 = f.d(0, bk), f1 = f.d(1, bk), f2 = f.d(2, bk);
        fk(k) = f0;
        v1(k) = f0 * db;   // DF piece 2 sum f I1(delta) delta
        v2(k) = f1 * i2;   // DF piece sum f' I2 eps
        w1v(k) = f1 * db;  // D^2F piece 4 sum f' I1(delta) delta (x)~ eps
        w2v(k) = f2 * i2;  // D^2F piece sum f'' I2 eps^{x2}
        gg(k) = f0 * f1;
        hh(k) = f1 * f1 + f0 * f2;
        mean_f2 += f0 * f0;
      }
      mean_f2 /= n;

      const double t1 = cu * cu *
                            (2.0 * fk.dot(beta2 * fk) + 4.0 * fk.dot(beta_alpha * w1v) +
                             fk.dot(alpha2 * w2v)) -
                        sigma * mean_f2;

      // g_j = <delta_j, DF>, h_j = <delta_j, DS^2>
      const Eigen::VectorXd g = cu * (2.0 * (beta * v1) + alpha * v2);
      const Eigen::VectorXd hvec = sigma * 2.0 / n * (alpha * gg);

      const double t2 = cu * fk.dot(g.cwiseProduct(g));
      const double t3 = cu * fk.dot(hvec.cwiseProduct(hvec));
      const double t4 = cu * sigma * 2.0 / n * fk.dot(alpha2 * hh);
      const double t5 = cu * fk.dot(g.cwiseProduct(hvec));

      rows[r] = {std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4), std::abs(t5)};
    }
  });

  WeightedQvTerms out;
  out.n = n;
  for (int i = 0; i < 5; ++i) {
    stats::Accumulator acc;
    for (const auto& row : rows) acc.add(row[static_cast<std::size_t>(i)]);
    out.terms[static_cast<std::size_t>(i)] = {acc.mean(), acc.se(), acc.count()};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem 5.1 assembly
// ---------------------------------------------------------------------------

namespace {

std::string orders_to_string(const DerivOrders& orders) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < orders.size(); ++i) os << (i ? "," : "") << orders[i];
  os << ")";
  return os.str();
}

}  // namespace

DerivOrders theorem51_deriv_orders(int k, const chaos::MultiIndexBeta& beta,
                                   std::span<const int> ls) {
  DerivOrders orders(static_cast<std::size_t>(beta.m + beta.d), 0);
  for (int l = 0; l < beta.m; ++l) orders[static_cast<std::size_t>(l)] = beta.a[static_cast<std::size_t>(l)];
  for (int j = 0; j < beta.d; ++j) {
    int bcol = 0;
    for (int i = 0; i < beta.q; ++i) bcol += beta.bp_at(i, j) + beta.bpp_at(i, j);
    orders[static_cast<std::size_t>(beta.m + j)] =
        bcol + beta.norm_bpp_col(j) - 2 * ls[static_cast<std::size_t>(j)] + (j == k ? 1 : 0);
  }
  return orders;
}

double assemble_theorem51_bound(const std::vector<int>& q_list, int d, int m,
                                const std::map<DerivOrders, double>& phi_norms,
                                const std::map<TermKey, double>& term_estimates,
                                const SecondDerivTerms& second_deriv_terms) {
  if (static_cast<int>(q_list.size()) != d)
    throw std::invalid_argument("assemble_theorem51_bound: q_list must have length d");

  auto phi_norm = [&](const DerivOrders& orders) {
    auto it = phi_norms.find(orders);
    if (it == phi_norms.end())
      throw std::invalid_argument("assemble_theorem51_bound: missing phi norm for derivative tuple " +
                                  orders_to_string(orders));
    return it->second;
  };

  // (w1): (1/2) sum_{k,j} ||d^2 phi / dx_k dx_j|| E|<D^{q_k}F_j, u_k> - 1_{j=k} S_j^2|
  double total = 0.0;
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j) {
      auto it = second_deriv_terms.find({k, j});
      if (it == second_deriv_terms.end())
        throw std::invalid_argument("assemble_theorem51_bound: missing (w1) estimate for pair (" +
                                    std::to_string(k) + "," + std::to_string(j) + ")");
      DerivOrders orders(static_cast<std::size_t>(m + d), 0);
      orders[static_cast<std::size_t>(m + k)] += 1;
      orders[static_cast<std::size_t>(m + j)] += 1;
      total += 0.5 * phi_norm(orders) * it->second;
    }

  // (w2)
  for (int k = 0; k < d; ++k) {
    const auto betas = chaos::enumerate_B0(q_list[static_cast<std::size_t>(k)], m, d);
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      const auto& beta = betas[bi];
      std::vector<int> ls(static_cast<std::size_t>(d), 0);
      for (;;) {
        const TermKey key{k, bi, ls};
        auto it = term_estimates.find(key);
        if (it == term_estimates.end()) {
          std::ostringstream os;
          os << "assemble_theorem51_bound: missing term estimate for (k=" << k
             << ", beta_index=" << bi << ", l=" << orders_to_string(ls) << ")";
          throw std::invalid_argument(os.str());
        }
        const double what = chaos::coeff_W_hat(beta, ls);
        total += 0.5 * what * phi_norm(theorem51_deriv_orders(k, beta, ls)) * it->second;

        int s = 0;
        for (; s < d; ++s) {
          if (2 * (ls[static_cast<std::size_t>(s)] + 1) <= beta.norm_bpp_col(s)) {
            ++ls[static_cast<std::size_t>(s)];
            std::fill(ls.begin(), ls.begin() + s, 0);
            break;
          }
        }
        if (s == d) break;
      }
    }
  }
  return total;
}

}  // namespace stable::estimators
