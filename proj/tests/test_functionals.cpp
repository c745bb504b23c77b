#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "stablerates/functionals.hpp"
#include "stablerates/rng.hpp"
#include "stablerates/stats.hpp"

using namespace stable;
using fbm::Hurst;

TEST_CASE("c_H values and continuity", "[functionals]") {
  CHECK(functionals::c_H(Hurst(0.5)) == Catch::Approx(1.0 / std::numbers::sqrt2).margin(1e-13));
  // H = 0.75: sqrt(0.375 * Gamma(1/2)) with Gamma(1/2) = sqrt(pi)
  CHECK(functionals::c_H(Hurst(0.75)) ==
        Catch::Approx(std::sqrt(0.375 * std::sqrt(std::numbers::pi))).margin(1e-12));
  CHECK(std::abs(functionals::c_H(Hurst(0.51)) - 1.0 / std::numbers::sqrt2) < 0.05);
  CHECK_THROWS_AS(functionals::c_H(Hurst(0.49)), std::domain_error);
}

TEST_CASE("sigma_H_series values", "[functionals]") {
  CHECK(functionals::sigma_H_series(Hurst(0.5)) == Catch::Approx(2.0).margin(1e-12));
  CHECK_THROWS_AS(functionals::sigma_H_series(Hurst(0.2)), std::domain_error);
  CHECK_THROWS_AS(functionals::sigma_H_series(Hurst(0.8)), std::domain_error);

  // independent truncated-series oracle with crude tail majorant
  const double H = 0.3;
  const double a = 2.0 * H;
  double oracle = 2.0;  // p = 0 term d_0^2/2
  for (long long p = 1; p <= 2'000'000; ++p) {
    const double d = std::pow(p + 1.0, a) + std::pow(std::abs(p - 1.0), a) - 2.0 * std::pow(p, a);
    oracle += d * d;
  }
  CHECK(functionals::sigma_H_series(Hurst(H)) == Catch::Approx(oracle).epsilon(1e-8));

  // termwise symmetry of the summand
  for (long long p : {1LL, 5LL, 40LL}) {
    auto d = [&](long long v) {
      return std::pow(std::abs(v + 1.0), a) + std::pow(std::abs(v - 1.0), a) -
             2.0 * std::pow(std::abs(static_cast<double>(v)), a);
    };
    CHECK(d(p) == Catch::Approx(d(-p)).margin(1e-15));
  }

  // continuity of sqrt(sigma) across H = 1/2
  const double below = std::sqrt(functionals::sigma_H_series(Hurst(0.499)));
  const double above = std::sqrt(functionals::sigma_H_series(Hurst(0.501)));
  CHECK(std::abs(below - above) < 1e-3);
}

TEST_CASE("rho_nm closed form vs quadrature oracle", "[functionals]") {
  // oracle: rho = int_0^1 u^{2H-2} g(u) du with g(u) = int_u^1 (t-u)^n t^m dt,
  // after u = w^{1/(2H-1)} the outer integrand is p * g(u(w)), p = 1/(2H-1).
  auto oracle = [](int n, int m, double H) {
    const double p = 1.0 / (2.0 * H - 1.0);
    const int mq = 1000;
    double total = 0.0;
    for (int i = 0; i < mq; ++i) {
      const double w = (i + 0.5) / mq;
      const double u = std::pow(w, p);
      double g = 0.0;
      for (int j = 0; j < mq; ++j) {
        const double t = u + (1.0 - u) * (j + 0.5) / mq;
        g += std::pow(t - u, n) * std::pow(t, m);
      }
      total += g * (1.0 - u) / mq;
    }
    return total * p / mq;
  };
  CHECK(functionals::rho_nm(1, 1, Hurst(0.6)) == Catch::Approx(oracle(1, 1, 0.6)).epsilon(1e-4));
  CHECK(functionals::rho_nm(2, 4, Hurst(0.75)) == Catch::Approx(oracle(2, 4, 0.75)).epsilon(1e-4));
  CHECK_THROWS_AS(functionals::rho_nm(1, 1, Hurst(0.5)), std::domain_error);
}

TEST_CASE("weight bank derivative ladders are consistent", "[functionals]") {
  for (const char* name : {"cos", "one_plus_x2"}) {
    const auto& f = functionals::weight_bank(name);
    for (int i = 0; i + 1 <= 4; ++i) {
      for (double x = -3.0; x <= 3.0; x += 0.37) {
        const double h = 1e-5;
        const double fd = (f.d(i, x + h) - f.d(i, x - h)) / (2.0 * h);
        CHECK(fd == Catch::Approx(f.d(i + 1, x)).margin(1e-4 * std::max(1.0, std::abs(fd))));
      }
    }
  }
  CHECK_THROWS_AS(functionals::weight_bank("nope"), std::invalid_argument);
  CHECK_THROWS_AS(functionals::weight_bank("cos").d(42, 0.0), std::invalid_argument);
}

TEST_CASE("QuadFunctional basics", "[functionals]") {
  CHECK_THROWS_AS(functionals::QuadFunctional(4, Hurst(0.4)), std::domain_error);
  CHECK_THROWS_AS(functionals::QuadFunctional(4, Hurst(0.6), 100), std::invalid_argument);
  CHECK_THROWS_AS(functionals::QuadFunctional(4, Hurst(0.6), 1 << 15), std::length_error);

  functionals::QuadFunctional qf(16, Hurst(0.75), 256);
  // forced zero path gives A_n = 0
  const std::vector<double> zeros(257, 0.0);
  CHECK(qf.evaluate(zeros) == 0.0);
  CHECK(qf.skorohod_shift() ==
        Catch::Approx(0.75 * std::pow(16.0, 0.75) / (1.5 + 16.0)).epsilon(1e-14));

  const auto s1 = qf.sample(31, 7);
  const auto s2 = qf.sample(31, 7);
  CHECK(s1.value == s2.value);
  CHECK(s1.limit_value == s2.limit_value);
  CHECK(s1.s_value ==
        Catch::Approx(functionals::c_H(Hurst(0.75)) * std::abs(s1.b1)).margin(1e-14));
}

TEST_CASE("A_n mean matches H n^H/(2H+n)", "[functionals][mc]") {
  for (double hh : {0.5, 0.75}) {
    functionals::QuadFunctional qf(16, Hurst(hh), 512);
    stats::Accumulator acc;
    std::vector<double> a(64), b1(64), eta(64);
    const int reps = 8192;
    for (int r = 0; r < reps; r += 64) {
      qf.sample_block(5150, static_cast<std::uint64_t>(r), 64, a, b1, eta);
      for (double v : a) acc.add(v);
    }
    CHECK(std::abs(acc.mean() - qf.skorohod_shift()) <= 4.0 * acc.se());
  }
}

TEST_CASE("skorohod F_n is centered", "[functionals][mc]") {
  functionals::QuadFunctional qf(8, Hurst(0.6), 512);
  const double shift = qf.skorohod_shift();
  stats::Accumulator acc;
  std::vector<double> a(64), b1(64), eta(64);
  for (int r = 0; r < 8192; r += 64) {
    qf.sample_block(99, static_cast<std::uint64_t>(r), 64, a, b1, eta);
    for (double v : a) acc.add(v - shift);
  }
  CHECK(std::abs(acc.mean()) <= 4.0 * acc.se());
  // n = 1 smoke
  functionals::QuadFunctional tiny(1, Hurst(0.6), 64);
  CHECK(std::isfinite(tiny.sample(1, 0).value));
}

TEST_CASE("A_n equals ito F_n plus shift in the mean, H = 1/2", "[functionals][mc]") {
  for (int n : {4, 16}) {
    functionals::QuadFunctional qf(n, Hurst(0.5), 1024);
    stats::Accumulator a_acc;
    std::vector<double> a(64), b1(64), eta(64);
    const int reps = 16384;
    for (int r = 0; r < reps; r += 64) {
      qf.sample_block(7, static_cast<std::uint64_t>(r), 64, a, b1, eta);
      for (double v : a) a_acc.add(v);
    }
    fbm::PathSampler sampler(fbm::TimeGrid::uniform(8 * n), Hurst(0.5));
    auto ws = sampler.make_workspace();
    std::vector<double> path(static_cast<std::size_t>(8 * n) + 1);
    stats::Accumulator f_acc;
    fbm::FbmPath fp{fbm::TimeGrid::uniform(8 * n), {}, Hurst(0.5), 0};
    fp.values.resize(path.size());
    for (int r = 0; r < reps; ++r) {
      sampler.sample(8, static_cast<std::uint64_t>(r), *ws, fp.values);
      f_acc.add(functionals::ito_Fn_half(fp, n));
    }
    const double shift = 0.5 * std::sqrt(static_cast<double>(n)) / (n + 1.0);
    const double se = std::sqrt(a_acc.se() * a_acc.se() + f_acc.se() * f_acc.se());
    CHECK(std::abs(a_acc.mean() - f_acc.mean() - shift) <= 4.0 * se);
  }
}

TEST_CASE("A_n quadrature refinement, coupled draws", "[functionals][slow]") {
  // Pathwise coupling: with the same stream the leading draws coincide, so
  // the A_n difference under grid doubling is pure quadrature refinement.
  // Paths are-Holder-H rough, which caps the trapezoid refinement rate at
  // mesh^{1/2+H}; at 2048 points the observed change sits near 3e-3.
  for (int n : {8, 512}) {
    const int mq = 2048;
    functionals::QuadFunctional coarse(n, Hurst(0.75), mq);
    functionals::QuadFunctional fine(n, Hurst(0.75), 2 * mq);
    Eigen::MatrixXd pc, pf;
    double worst = 0.0;
    for (int r = 0; r < 3; ++r) {
      coarse.sample_paths(404, static_cast<std::uint64_t>(r), 1, pc);
      fine.sample_paths(404, static_cast<std::uint64_t>(r), 1, pf);
      for (int j = 0; j < 8; ++j) CHECK(pf(j, 0) == Catch::Approx(pc(j, 0)).margin(1e-6));
      const double ac = coarse.evaluate({pc.col(0).data(), static_cast<std::size_t>(pc.rows())});
      const double af = fine.evaluate({pf.col(0).data(), static_cast<std::size_t>(pf.rows())});
      worst = std::max(worst, std::abs(af - ac) / std::abs(ac));
    }
    CHECK(worst < 8e-3);
  }
}

TEST_CASE("ito_Fn_half contracts", "[functionals]") {
  fbm::FbmPath flat{fbm::TimeGrid::uniform(64), std::vector<double>(65, 0.0), Hurst(0.5), 0};
  CHECK(functionals::ito_Fn_half(flat, 4) == 0.0);
  CHECK_THROWS_AS(functionals::ito_Fn_half(flat, 16), std::invalid_argument);  // 64 < 8*16
  fbm::FbmPath wrongH{fbm::TimeGrid::uniform(64), std::vector<double>(65, 0.0), Hurst(0.6), 0};
  CHECK_THROWS_AS(functionals::ito_Fn_half(wrongH, 4), std::invalid_argument);
}

TEST_CASE("ito F_n martingale mean and E|F_n| bound", "[functionals][mc]") {
  const int n = 4, m = 64;
  fbm::PathSampler sampler(fbm::TimeGrid::uniform(m), Hurst(0.5));
  auto ws = sampler.make_workspace();
  fbm::FbmPath fp{fbm::TimeGrid::uniform(m), std::vector<double>(m + 1), Hurst(0.5), 0};
  stats::Accumulator mean_acc, abs_acc;
  for (int r = 0; r < 20000; ++r) {
    sampler.sample(15, static_cast<std::uint64_t>(r), *ws, fp.values);
    const double f = functionals::ito_Fn_half(fp, n);
    mean_acc.add(f);
    abs_acc.add(std::abs(f));
  }
  CHECK(std::abs(mean_acc.mean()) <= 4.0 * mean_acc.se());
  CHECK(abs_acc.mean() <=
        std::sqrt(static_cast<double>(n)) / std::sqrt(2.0 * n + 2.0) + 3.0 * abs_acc.se());
}

TEST_CASE("weighted_qv_Fn contracts and trivial cases", "[functionals]") {
  const auto& zero = functionals::weight_bank("zero");
  const auto path = fbm::sample_path(fbm::TimeGrid::uniform(64), Hurst(0.4), 3);
  CHECK(functionals::weighted_qv_Fn(path, zero, Hurst(0.4)) == 0.0);

  fbm::FbmPath bad{fbm::TimeGrid({0.0, 0.3, 1.0}), {0.0, 0.1, 0.2}, Hurst(0.4), 0};
  CHECK_THROWS_AS(functionals::weighted_qv_Fn(bad, zero, Hurst(0.4)), std::invalid_argument);
  CHECK_THROWS_AS(functionals::weighted_qv_Fn(path, zero, Hurst(0.2)), std::domain_error);

  // pathwise scaling: qv is linear in f
  const auto& f = functionals::weight_bank("cos");
  functionals::WeightFunction scaled;
  scaled.name = "3cos";
  for (int i = 0; i < 10; ++i)
    scaled.derivatives.emplace_back([&f, i](double x) { return 3.0 * f.d(i, x); });
  CHECK(functionals::weighted_qv_Fn(path, scaled, Hurst(0.4)) ==
        Catch::Approx(3.0 * functionals::weighted_qv_Fn(path, f, Hurst(0.4))).epsilon(1e-12));
  CHECK(functionals::weighted_limit_sample(path, scaled, Hurst(0.4), 0.7) ==
        Catch::Approx(3.0 * functionals::weighted_limit_sample(path, f, Hurst(0.4), 0.7))
            .epsilon(1e-12));
}

TEST_CASE("LimitSpec invariant and dispatch", "[functionals]") {
  using functionals::LimitKind;
  using functionals::LimitSpec;
  CHECK_THROWS_AS(LimitSpec(LimitKind::weighted_qv, Hurst(0.4)), std::invalid_argument);
  CHECK_THROWS_AS(
      LimitSpec(LimitKind::quadratic, Hurst(0.75), functionals::weight_bank("cos")),
      std::invalid_argument);

  const auto path = fbm::sample_path(fbm::TimeGrid::uniform(32), Hurst(0.75), 6);
  const double eta = 1.21;
  const LimitSpec quad(LimitKind::quadratic, Hurst(0.75));
  CHECK(functionals::limit_sample(quad, path, eta) ==
        Catch::Approx(functionals::c_H(Hurst(0.75)) * std::abs(path.values.back()) * eta)
            .margin(1e-14));

  const auto bm = fbm::sample_path(fbm::TimeGrid::uniform(32), Hurst(0.5), 6);
  const LimitSpec wqv(LimitKind::weighted_qv, Hurst(0.5), functionals::weight_bank("cos"));
  CHECK(functionals::limit_sample(wqv, bm, eta) ==
        Catch::Approx(functionals::weighted_limit_sample(bm, functionals::weight_bank("cos"),
                                                         Hurst(0.5), eta))
            .margin(1e-14));
}

TEST_CASE("skorohod_Fn one-shot form", "[functionals]") {
  CHECK_THROWS_AS(functionals::skorohod_Fn(4, Hurst(0.5), 1), std::domain_error);
  functionals::QuadFunctional qf(8, Hurst(0.6));
  const double expect = qf.sample(41, 0).value - qf.skorohod_shift();
  CHECK(functionals::skorohod_Fn(8, Hurst(0.6), 41) == expect);
}

TEST_CASE("weighted limit sample closed forms", "[functionals]") {
  const auto path = fbm::sample_path(fbm::TimeGrid::uniform(32), Hurst(0.5), 17);
  const auto& one = functionals::weight_bank("one");
  const double eta = -0.83;
  CHECK(functionals::weighted_limit_sample(path, one, Hurst(0.5), eta) ==
        Catch::Approx(std::numbers::sqrt2 * eta).margin(1e-12));
  CHECK(functionals::weighted_limit_sample(path, functionals::weight_bank("zero"), Hurst(0.5),
                                           eta) == 0.0);
}

TEST_CASE("weighted qv variance at H = 1/2, f = 1", "[functionals][mc]") {
  const int n = 256;
  fbm::PathSampler sampler(fbm::TimeGrid::uniform(n), Hurst(0.5));
  auto ws = sampler.make_workspace();
  fbm::FbmPath fp{fbm::TimeGrid::uniform(n), std::vector<double>(n + 1), Hurst(0.5), 0};
  const auto& one = functionals::weight_bank("one");
  stats::Accumulator acc;
  for (int r = 0; r < 20000; ++r) {
    sampler.sample(23, static_cast<std::uint64_t>(r), *ws, fp.values);
    acc.add(functionals::weighted_qv_Fn(fp, one, Hurst(0.5)));
  }
  CHECK(std::abs(acc.mean()) <= 4.0 * acc.se());
  CHECK(acc.variance() == Catch::Approx(2.0).margin(0.12));
}
