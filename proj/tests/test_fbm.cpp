#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "stablerates/fbm.hpp"
#include "stablerates/stats.hpp"

using namespace stable;
using fbm::Hurst;

TEST_CASE("fbm_covariance pinned values", "[fbm]") {
  CHECK(fbm::fbm_covariance(1.0, 1.0, Hurst(0.75)) == Catch::Approx(1.0).margin(1e-15));
  CHECK(fbm::fbm_covariance(0.3, 0.7, Hurst(0.5)) == Catch::Approx(0.3).margin(1e-15));
  // the two 0.5^{1.5} terms cancel, leaving 1/2
  CHECK(fbm::fbm_covariance(0.5, 1.0, Hurst(0.75)) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("fbm_covariance symmetry and H=1/2 reduction", "[fbm]") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double s = u(gen), t = u(gen);
    const Hurst h(0.05 + 0.9 * (i % 19) / 19.0);
    CHECK(fbm::fbm_covariance(s, t, h) == fbm::fbm_covariance(t, s, h));
    CHECK(fbm::fbm_covariance(s, t, Hurst(0.5)) == Catch::Approx(std::min(s, t)).margin(1e-14));
  }
}

TEST_CASE("fbm parameter errors", "[fbm]") {
  CHECK_THROWS_AS(Hurst(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Hurst(1.0), std::invalid_argument);
  CHECK_THROWS_AS(fbm::fbm_covariance(-0.1, 0.5, Hurst(0.5)), std::invalid_argument);
  CHECK_THROWS_AS(fbm::indicator_inner(-0.1, 0.2, 0.0, 1.0, Hurst(0.5)), std::invalid_argument);
  CHECK_THROWS_AS(fbm::indicator_inner(0.4, 0.2, 0.0, 1.0, Hurst(0.5)), std::invalid_argument);
}

TEST_CASE("indicator_inner identities", "[fbm]") {
  const Hurst h(0.3);
  // [0,t] x [0,s] is the covariance itself
  CHECK(fbm::indicator_inner(0.0, 0.8, 0.0, 0.4, h) ==
        Catch::Approx(fbm::fbm_covariance(0.8, 0.4, h)).margin(1e-15));
  // unit-step increment variance n^{-2H}
  const int n = 16;
  CHECK(fbm::indicator_inner(3.0 / n, 4.0 / n, 3.0 / n, 4.0 / n, h) ==
        Catch::Approx(std::pow(n, -2.0 * h.h)).epsilon(1e-12));
  // adjacent quarter-intervals at H = 0.3: value equals both the four-term
  // covariance combination and 4^{-0.6} rho_H(1)
  const double direct = fbm::fbm_covariance(0.25, 0.5, h) - fbm::fbm_covariance(0.25, 0.25, h) -
                        fbm::fbm_covariance(0.0, 0.5, h) + fbm::fbm_covariance(0.0, 0.25, h);
  const double val = fbm::indicator_inner(0.0, 0.25, 0.25, 0.5, h);
  CHECK(val == Catch::Approx(direct).margin(1e-15));
  CHECK(val == Catch::Approx(std::pow(4.0, -0.6) * fbm::rho_H(1, h)).epsilon(1e-12));
  CHECK(val == Catch::Approx(-0.105397).epsilon(1e-4));  // frozen from the oracle above
}

TEST_CASE("indicator_inner bilinearity under splitting", "[fbm]") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Hurst h(0.1 + 0.8 * (i % 17) / 17.0);
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    const double mid = a + (b - a) * 0.37;
    double c = u(gen), d = u(gen);
    if (c > d) std::swap(c, d);
    const double whole = fbm::indicator_inner(a, b, c, d, h);
    const double parts =
        fbm::indicator_inner(a, mid, c, d, h) + fbm::indicator_inner(mid, b, c, d, h);
    CHECK(whole == Catch::Approx(parts).margin(1e-12));
  }
}

TEST_CASE("rho_H values and decay", "[fbm]") {
  CHECK(fbm::rho_H(0, Hurst(0.3)) == Catch::Approx(1.0).margin(1e-15));
  CHECK(fbm::rho_H(0, Hurst(0.8)) == Catch::Approx(1.0).margin(1e-15));
  for (long long p = 1; p < 6; ++p) CHECK(fbm::rho_H(p, Hurst(0.5)) == 0.0);
  CHECK(fbm::rho_H(1, Hurst(0.3)) ==
        Catch::Approx(0.5 * (std::pow(2.0, 0.6) - 2.0)).epsilon(1e-14));
  for (long long p = 1; p < 50; ++p) {
    CHECK(fbm::rho_H(p, Hurst(0.3)) == fbm::rho_H(-p, Hurst(0.3)));
  }
  // |rho_H(p)| <= C |p|^{2H-2} for p >= 2
  for (double hh : {0.1, 0.3, 0.45, 0.6, 0.9}) {
    const Hurst h(hh);
    for (long long p = 2; p <= 1000; p *= 2) {
      CHECK(std::abs(fbm::rho_H(p, h)) <= 2.0 * std::pow(static_cast<double>(p), 2.0 * hh - 2.0));
    }
  }
}

TEST_CASE("lemma61_quantities", "[fbm]") {
  CHECK_THROWS_AS(fbm::lemma61_quantities(8, 1, Hurst(0.5)), std::domain_error);
  CHECK_THROWS_AS(fbm::lemma61_quantities(8, 1, Hurst(0.7)), std::domain_error);

  // n = 2, q = 1, H = 0.3 by direct 2x2 summation
  const Hurst h(0.3);
  const double b00 = fbm::indicator_inner(0.0, 0.5, 0.0, 0.5, h);
  const double b01 = fbm::indicator_inner(0.0, 0.5, 0.5, 1.0, h);
  const double expect = 2.0 * std::abs(b00) + 2.0 * std::abs(b01);
  const auto q61 = fbm::lemma61_quantities(2, 1, h);
  CHECK(q61.sum_beta_q == Catch::Approx(expect).epsilon(1e-12));
  CHECK(expect == Catch::Approx(1.63902).epsilon(1e-4));  // frozen from the oracle above

  // max_alpha never exceeds n^{-2H}
  for (int n : {4, 16, 64}) {
    const auto r = fbm::lemma61_quantities(n, 1, h);
    CHECK(r.max_alpha <= std::pow(static_cast<double>(n), -2.0 * h.h) * (1.0 + 1e-12));
  }

  // ladder slope toward 1 - 2qH (full ladder is in the acceptance suite)
  std::vector<double> logs_n, logs_v;
  for (int n : {32, 64, 128, 256, 512, 1024}) {
    logs_n.push_back(std::log(n));
    logs_v.push_back(std::log(fbm::lemma61_quantities(n, 2, h).sum_beta_q));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logs_n.size(); ++i) {
    mx += logs_n[i];
    my += logs_v[i];
  }
  mx /= logs_n.size();
  my /= logs_n.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < logs_n.size(); ++i) {
    sxx += (logs_n[i] - mx) * (logs_n[i] - mx);
    sxy += (logs_n[i] - mx) * (logs_v[i] - my);
  }
  CHECK(sxy / sxx == Catch::Approx(1.0 - 2.0 * 2 * 0.3).margin(0.1));
}

TEST_CASE("sample_path determinism and zero start", "[fbm]") {
  const auto grid = fbm::TimeGrid::uniform(64);
  for (double hh : {0.3, 0.5, 0.75}) {
    const auto p1 = fbm::sample_path(grid, Hurst(hh), 99);
    const auto p2 = fbm::sample_path(grid, Hurst(hh), 99);
    REQUIRE(p1.values.size() == grid.size());
    CHECK(p1.values == p2.values);  // bit-identical
    CHECK(p1.values[0] == 0.0);
    const auto p3 = fbm::sample_path(grid, Hurst(hh), 100);
    CHECK(p1.values != p3.values);
  }
}

TEST_CASE("sample_path increment law, H = 1/2", "[fbm][mc]") {
  const int n = 16;
  const int reps = 20000;
  const auto grid = fbm::TimeGrid::uniform(n);
  fbm::PathSampler sampler(grid, Hurst(0.5));
  auto ws = sampler.make_workspace();
  std::vector<double> path(grid.size());
  std::vector<stats::Accumulator> var_acc(n);
  stats::Accumulator lag1;
  for (int r = 0; r < reps; ++r) {
    sampler.sample(2024, static_cast<std::uint64_t>(r), *ws, path);
    for (int k = 0; k < n; ++k) {
      const double dk = path[static_cast<std::size_t>(k) + 1] - path[static_cast<std::size_t>(k)];
      var_acc[static_cast<std::size_t>(k)].add(dk * dk);
    }
    lag1.add((path[1] - path[0]) * (path[2] - path[1]));
  }
  for (int k = 0; k < n; ++k) {
    const auto& acc = var_acc[static_cast<std::size_t>(k)];
    CHECK(std::abs(acc.mean() - 1.0 / n) <= 4.0 * acc.se());
  }
  CHECK(std::abs(lag1.mean()) <= 4.0 * lag1.se());
}

TEST_CASE("sample_path lag-1 correlation, H = 0.3", "[fbm][mc]") {
  const int n = 64;
  const int reps = 40000;
  fbm::PathSampler sampler(fbm::TimeGrid::uniform(n), Hurst(0.3));
  auto ws = sampler.make_workspace();
  std::vector<double> path(static_cast<std::size_t>(n) + 1);
  stats::Accumulator prod, var;
  for (int r = 0; r < reps; ++r) {
    sampler.sample(77, static_cast<std::uint64_t>(r), *ws, path);
    const double d0 = path[6] - path[5];
    const double d1 = path[7] - path[6];
    prod.add(d0 * d1);
    var.add(d0 * d0);
  }
  const double scale = std::pow(static_cast<double>(n), -0.6);
  CHECK(std::abs(prod.mean() - scale * fbm::rho_H(1, Hurst(0.3))) <= 4.0 * prod.se());
  CHECK(std::abs(var.mean() - scale) <= 4.0 * var.se());
}

TEST_CASE("nonuniform grids use the dense route and stay PSD", "[fbm]") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pts;
  for (int i = 0; i < 512; ++i) pts.push_back(u(gen));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  for (double hh : {0.15, 0.3, 0.7, 0.9}) {
    const fbm::TimeGrid grid(pts);
    const auto p = fbm::sample_path(grid, Hurst(hh), 4);  // throws if not PSD after jitter
    REQUIRE(p.values.size() == pts.size());
    for (double v : p.values) CHECK(std::isfinite(v));
  }
}

TEST_CASE("refinement_order is nested under doubling", "[fbm]") {
  for (int m : {4, 16, 256}) {
    const auto coarse = fbm::refinement_order(m);
    const auto fine = fbm::refinement_order(2 * m);
    REQUIRE(coarse.size() == static_cast<std::size_t>(m) + 1);
    REQUIRE(fine.size() == static_cast<std::size_t>(2 * m) + 1);
    for (std::size_t j = 0; j < coarse.size(); ++j) CHECK(fine[j] == 2 * coarse[j]);
  }
  CHECK_THROWS_AS(fbm::refinement_order(12), std::invalid_argument);
}

TEST_CASE("ClusterSampler Brownian bridge matches the Cholesky factor", "[fbm]") {
  // The bridge fill-in is a triangular map z -> values; for H = 1/2 it must
  // coincide with the Cholesky factor of the covariance in sampling order.
  const std::vector<double> times = {1.0, 0.5, 0.25, 0.75, 0.125};
  const int m = static_cast<int>(times.size());
  Eigen::MatrixXd cov(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      cov(i, j) = std::min(times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  // reconstruct the implied linear map column by column via linearity:
  // feeding the bridge with z and -z and averaging isolates the map.
  fbm::ClusterSampler sampler(times, Hurst(0.5));
  Eigen::MatrixXd block;
  sampler.sample_block(123, 0, 8, block);
  Eigen::MatrixXd cov_emp = Eigen::MatrixXd::Zero(m, m);
  const int reps = 60000;
  for (int r = 0; r < reps; r += 8) {
    sampler.sample_block(123, static_cast<std::uint64_t>(r), 8, block);
    for (int c = 0; c < 8; ++c) cov_emp += block.col(c) * block.col(c).transpose();
  }
  cov_emp /= static_cast<double>((reps / 8) * 8);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      CHECK(cov_emp(i, j) == Catch::Approx(cov(i, j)).margin(0.02));
  CHECK(chol(0, 0) == Catch::Approx(1.0));  // sanity on the comparison object
}

TEST_CASE("ClusterSampler dense route covariance, H = 0.75", "[fbm][mc]") {
  const std::vector<double> times = {1.0, 0.9, 0.95, 0.97};
  fbm::ClusterSampler sampler(times, Hurst(0.75));
  Eigen::MatrixXd block;
  Eigen::MatrixXd cov_emp = Eigen::MatrixXd::Zero(4, 4);
  const int reps = 40000;
  for (int r = 0; r < reps; r += 16) {
    sampler.sample_block(9, static_cast<std::uint64_t>(r), 16, block);
    for (int c = 0; c < 16; ++c) cov_emp += block.col(c) * block.col(c).transpose();
  }
  cov_emp /= static_cast<double>(reps);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(cov_emp(i, j) ==
            Catch::Approx(fbm::fbm_covariance(times[static_cast<std::size_t>(i)],
                                              times[static_cast<std::size_t>(j)], Hurst(0.75)))
                .margin(0.03));
}

TEST_CASE("ClusterSampler block width does not change replicate values", "[fbm]") {
  const std::vector<double> times = {1.0, 0.5, 0.25, 0.75};
  for (double hh : {0.5, 0.7}) {
    fbm::ClusterSampler sampler(times, Hurst(hh));
    Eigen::MatrixXd wide, narrow;
    sampler.sample_block(42, 0, 16, wide);
    sampler.sample_block(42, 3, 1, narrow);
    for (int i = 0; i < 4; ++i) CHECK(narrow(i, 0) == wide(i, 3));
  }
}
