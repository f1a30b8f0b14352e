#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fullflow/minconv.hpp"
#include "oracles.hpp"

using namespace fullflow;

namespace {

constexpr double kInf = kInfinity;

std::vector<double> random_vector(std::mt19937& rng, int n, double hi = 10.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  std::vector<double> g(n);
  for (auto& v : g) v = u(rng);
  return g;
}

auto as_function(const Penalty& p, double weight) {
  return [p, weight](int x) { return weight * p(x); };
}

void expect_near_all(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

// --- brute force -----------------------------------------------------------

TEST(MinConvBrute, Examples) {
  const std::vector<double> g{3, 1, 4};
  EXPECT_EQ(minconv_brute(std::span<const double>(g), as_function(Penalty::l1(), 1.0)),
            (std::vector<double>{2, 1, 2}));
  const std::vector<double> c(7, 2.5);
  EXPECT_EQ(minconv_brute(std::span<const double>(c), as_function(Penalty::squared_l2(), 3.0)), c);
  const std::vector<double> src{0, kInf, kInf};
  EXPECT_EQ(minconv_brute(std::span<const double>(src), as_function(Penalty::squared_l2(), 1.0)),
            (std::vector<double>{0, 1, 4}));
}

TEST(MinConvBrute, MatchesOracle) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_vector(rng, 1 + trial % 17);
    const auto rho = as_function(Penalty::charbonnier(2.0), 0.7);
    expect_near_all(minconv_brute(std::span<const double>(g), rho), oracle::minconv1d(g, rho), 0.0);
  }
}

// --- L1 ----------------------------------------------------------------------

TEST(DtL1, Examples) {
  EXPECT_EQ(dt_l1(std::vector<double>{3, 1, 4}, 1.0), (std::vector<double>{2, 1, 2}));
  EXPECT_EQ(dt_l1(std::vector<double>{5}, 7.0), (std::vector<double>{5}));
  EXPECT_EQ(dt_l1(std::vector<double>{0, 10, 10, 10}, 2.0), (std::vector<double>{0, 2, 4, 6}));
}

TEST(DtL1, ExactOnIntegers) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> u(0, 50);
  for (int n = 1; n <= 40; ++n) {
    std::vector<double> g(n);
    for (auto& v : g) v = u(rng);
    EXPECT_EQ(dt_l1(g, 3.0), oracle::minconv1d(g, as_function(Penalty::l1(), 3.0)));
  }
}

TEST(DtL1, InPlace) {
  std::vector<double> g{9, 0, 9, 9, 1};
  const auto expected = dt_l1(g, 2.0);
  dt_l1<double>(std::span<const double>(g), 2.0, std::span<double>(g));
  EXPECT_EQ(g, expected);
}

TEST(DtL1, RandomMatchesBrute) {
  std::mt19937 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 64;
    const double slope = std::uniform_real_distribution<double>(0.01, 5.0)(rng);
    const auto g = random_vector(rng, n);
    expect_near_all(dt_l1(g, slope), oracle::minconv1d(g, as_function(Penalty::l1(), slope)), 1e-9);
  }
}

// --- squared L2 --------------------------------------------------------------

TEST(DtQuadratic, Examples) {
  EXPECT_EQ(dt_quadratic(std::vector<double>{0, kInf, kInf}, 1.0), (std::vector<double>{0, 1, 4}));
  const std::vector<double> c(9, -1.25);
  EXPECT_EQ(dt_quadratic(c, 4.0), c);
}

TEST(DtQuadratic, RandomMatchesBrute) {
  std::mt19937 rng(2);
  for (double weight : {0.1, 1.0, 10.0})
    for (int trial = 0; trial < 64; ++trial) {
      const auto g = random_vector(rng, 1 + trial);
      expect_near_all(dt_quadratic(g, weight), oracle::minconv1d(g, as_function(Penalty::squared_l2(), weight)),
                      1e-9);
    }
}

TEST(DtQuadratic, SparseSources) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_vector(rng, 33);
    for (auto& v : g)
      if (rng() % 3 != 0) v = kInf;
    g[rng() % g.size()] = 1.0;
    const auto fast = dt_quadratic(g, 0.5);
    const auto ref = oracle::minconv1d(g, as_function(Penalty::squared_l2(), 0.5));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(fast[i], ref[i], 1e-9);
  }
}

// --- SMAWK -------------------------------------------------------------------

TEST(Smawk, Examples) {
  SmawkMinConv l1(as_function(Penalty::l1(), 1.0), 3);
  const auto r = l1(std::vector<double>{3, 1, 4});
  EXPECT_EQ(r.h, (std::vector<double>{2, 1, 2}));
  EXPECT_EQ(r.ind, (std::vector<int>{1, 1, 1}));

  std::vector<double> g(9, kInf);
  g[0] = 0.0;
  SmawkMinConv ch(as_function(Penalty::charbonnier(5.0), 1.0), 9);
  const auto c = ch(g);
  for (int i = 0; i < 9; ++i) {
    EXPECT_NEAR(c.h[i], std::sqrt(i * i + 25.0), 1e-12);
    EXPECT_EQ(c.ind[i], 0);
  }

  SmawkMinConv one(as_function(Penalty::charbonnier(5.0), 1.0), 1);
  const auto s = one(std::vector<double>{2.0});
  EXPECT_EQ(s.h, (std::vector<double>{7.0}));
  EXPECT_EQ(s.ind, (std::vector<int>{0}));
}

TEST(Smawk, RejectsNonConvex) {
  auto lorentzian = [](int x) { return std::log1p(x * x / 2.0); };
  EXPECT_THROW(SmawkMinConv(lorentzian, 9), InputError);
  EXPECT_NO_THROW(SmawkMinConv(lorentzian, 1));
}

TEST(Smawk, RejectsLengthMismatch) {
  SmawkMinConv s(as_function(Penalty::l1(), 1.0), 4);
  EXPECT_THROW(s(std::vector<double>{1, 2, 3}), InputError);
}

TEST(Smawk, RandomMatchesBruteAllPenalties) {
  std::mt19937 rng(4);
  for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0), Penalty::charbonnier(0.5)})
    for (int n = 1; n <= 80; ++n) {
      const auto rho = as_function(p, 0.3 + 0.1 * (n % 7));
      SmawkMinConv s(rho, n);
      const auto g = random_vector(rng, n);
      const auto r = s(g);
      expect_near_all(r.h, oracle::minconv1d(g, rho), 1e-9);
      EXPECT_EQ(r.ind, oracle::row_argmin(g, rho));
    }
}

TEST(Smawk, TiesResolveToSmallestColumn) {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> u(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 40;
    std::vector<double> g(n);
    for (auto& v : g) v = u(rng);
    const auto rho = as_function(Penalty::l1(), 1.0);
    SmawkMinConv s(rho, n);
    const auto r = s(g);
    EXPECT_EQ(r.ind, oracle::row_argmin(g, rho)) << "n=" << n;
    expect_near_all(r.h, oracle::minconv1d(g, rho), 0.0);
  }
}

TEST(Smawk, RowMinimumIsAttained) {
  std::mt19937 rng(9);
  const auto rho = as_function(Penalty::charbonnier(3.0), 1.0);
  for (int n = 1; n < 60; ++n) {
    SmawkMinConv s(rho, n);
    const auto g = random_vector(rng, n);
    const auto r = s(g);
    for (int i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(r.h[i], g[r.ind[i]] + rho(i - r.ind[i]));
  }
}

TEST(Smawk, LinearEvaluationCount) {
  std::mt19937 rng(10);
  for (int n : {1, 2, 3, 5, 8, 17, 100, 257, 1000, 4096}) {
    for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0)}) {
      SmawkMinConv s(as_function(p, 1.0), n);
      s.reset_evaluations();
      const auto g = random_vector(rng, n, 100.0);
      s(g);
      EXPECT_LE(s.evaluations(), 8u * n) << "n=" << n;
    }
  }
}

// --- 2D ----------------------------------------------------------------------

TEST(MinConv2d, ZeroSource) {
  for (int r : {0, 1, 3}) {
    const LabelSpace ls(r);
    const std::vector<double> phi(ls.size(), 0.0);
    for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2()})
      EXPECT_EQ(minconv2d(phi, ls, p, 2.0, kUntruncated), phi);
  }
}

TEST(MinConv2d, L1Cone) {
  const LabelSpace ls(2);
  std::vector<double> phi(ls.size(), kInf);
  phi[ls.index(0, 0)] = 0.0;
  const auto m = minconv2d(phi, ls, Penalty::l1(), 1.0, kUntruncated);
  const auto mt = minconv2d(phi, ls, Penalty::l1(), 1.0, 1.5);
  for (int k = 0; k < ls.size(); ++k) {
    const Displacement d = ls.displacement(k);
    EXPECT_EQ(m[k], std::abs(d.dx) + std::abs(d.dy));
    EXPECT_EQ(mt[k], std::min<double>(std::abs(d.dx) + std::abs(d.dy), 1.5));
  }
  EXPECT_EQ(mt[ls.index(1, 1)], 1.5);
}

TEST(MinConv2d, MatchesBruteForceAllKernels) {
  std::mt19937 rng(12);
  for (int r = 0; r <= 4; ++r) {
    const LabelSpace ls(r);
    for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0)})
      for (double tau : {1.5, 7.0, kUntruncated})
        for (int trial = 0; trial < 10; ++trial) {
          const auto phi = random_vector(rng, ls.size());
          const double w = 0.2 + trial * 0.1;
          const auto ref = oracle::minconv2d(phi, r, p, w, tau);
          for (auto kernel : {MinConvKernel::Auto, MinConvKernel::Smawk, MinConvKernel::Brute})
            expect_near_all(minconv2d(phi, ls, p, w, tau, kernel), ref, 1e-9);
          std::vector<double> direct(ls.size());
          minconv2d_direct<double>(phi, ls, p, w, tau, direct);
          expect_near_all(direct, ref, 1e-9);
        }
  }
}

TEST(MinConv2d, ZeroWeightGivesConstantMinimum) {
  std::mt19937 rng(13);
  const LabelSpace ls(2);
  const auto phi = random_vector(rng, ls.size());
  const double lo = *std::min_element(phi.begin(), phi.end());
  for (double v : minconv2d(phi, ls, Penalty::l1(), 0.0, kUntruncated)) EXPECT_EQ(v, lo);
}

TEST(MinConv2d, ShiftEquivariance) {
  std::mt19937 rng(14);
  const LabelSpace ls(3);
  for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0)})
    for (double tau : {2.0, kUntruncated}) {
      const auto phi = random_vector(rng, ls.size());
      auto shifted = phi;
      for (auto& v : shifted) v += 3.25;
      const auto a = minconv2d(phi, ls, p, 0.8, tau);
      const auto b = minconv2d(shifted, ls, p, 0.8, tau);
      for (int k = 0; k < ls.size(); ++k) EXPECT_NEAR(b[k], a[k] + 3.25, 1e-12);
    }
}

TEST(MinConv2d, LipschitzEnvelope) {
  std::mt19937 rng(15);
  const int r = 3;
  const LabelSpace ls(r);
  const double w = 0.6;
  for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0)}) {
    const auto phi = random_vector(rng, ls.size());
    const auto m = minconv2d(phi, ls, p, w, kUntruncated);
    // largest one-step increase of the kernel within the label range
    double step = 0.0;
    for (int x = -2 * r; x < 2 * r; ++x) step = std::max(step, std::abs(p(x + 1) - p(x)));
    for (int k = 0; k < ls.size(); ++k) {
      EXPECT_LE(m[k], phi[k] + w * 2 * p(0) + 1e-12);
      const Displacement d = ls.displacement(k);
      if (d.dx < r) { EXPECT_LE(m[k], m[ls.index(d.dx + 1, d.dy)] + w * step + 1e-12); }
      if (d.dy < r) { EXPECT_LE(m[k], m[ls.index(d.dx, d.dy + 1)] + w * step + 1e-12); }
    }
  }
}

TEST(MinConv2d, SentinelStaysFinite) {
  const LabelSpace ls(3);
  std::vector<double> phi(ls.size(), kInf);
  phi[5] = 0.25;
  for (const Penalty& p : {Penalty::l1(), Penalty::squared_l2(), Penalty::charbonnier(5.0)}) {
    const auto m = minconv2d(phi, ls, p, 1.0, kUntruncated);
    for (double v : m) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_FALSE(is_infinite(v));
    }
  }
}

TEST(MinConv2d, FloatStorage) {
  std::mt19937 rng(16);
  const LabelSpace ls(2);
  const auto phi = random_vector(rng, ls.size());
  std::vector<float> pf(phi.begin(), phi.end()), out(ls.size());
  MinConvWorkspace ws;
  minconv2d<float>(pf, ls, Penalty::l1(), 0.5, 3.0, out, ws);
  const auto ref = oracle::minconv2d(std::vector<double>(pf.begin(), pf.end()), 2, Penalty::l1(), 0.5, 3.0);
  for (int k = 0; k < ls.size(); ++k) EXPECT_NEAR(out[k], ref[k], 1e-5);
}
