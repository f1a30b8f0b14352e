#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fullflow/cost_volume.hpp"

using namespace fullflow;

namespace {

Image random_image(std::mt19937& rng, int w, int h) {
  Image img(w, h);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

// Truncated NCC straight from the definition: per-channel correlation of the
// clamped patches, zero for flat channels, averaged, then 1 - max(., 0).
double reference_ncc(const Image& a, const Image& b, int x, int y, Displacement s, int r, double zeta) {
  const int tx = x + s.dx, ty = y + s.dy;
  if (tx < 0 || ty < 0 || tx >= b.width() || ty >= b.height()) return zeta;
  auto sample = [](const Image& img, int px, int py, int c) {
    px = std::clamp(px, 0, img.width() - 1);
    py = std::clamp(py, 0, img.height() - 1);
    return static_cast<double>(img.at(px, py, c));
  };
  const double n = (2 * r + 1) * (2 * r + 1);
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double ma = 0, mb = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        ma += sample(a, x + dx, y + dy, c);
        mb += sample(b, tx + dx, ty + dy, c);
      }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const double da = sample(a, x + dx, y + dy, c) - ma, db = sample(b, tx + dx, ty + dy, c) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
    if (saa / n < 1e-12 || sbb / n < 1e-12) continue;
    total += sab / std::sqrt(saa * sbb);
  }
  return std::clamp(1.0 - std::max(total / 3.0, 0.0), 0.0, 1.0);
}

}  // namespace

TEST(NccCost, SelfMatchIsZero) {
  std::mt19937 rng(1);
  const Image img = random_image(rng, 6, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_NEAR(ncc_cost(img, img, x, y, {0, 0}, 1, 1.0), 0.0, 1e-12);
}

TEST(NccCost, AntiCorrelatedIsOne) {
  std::mt19937 rng(2);
  const Image a = random_image(rng, 3, 3);
  Image b = a;
  for (auto& v : b.data()) v = 1.0f - v;  // negation about the mean in every channel
  EXPECT_NEAR(ncc_cost(a, b, 1, 1, {0, 0}, 1, 1.0), 1.0, 1e-12);
}

TEST(NccCost, BufferZone) {
  std::mt19937 rng(3);
  const Image a = random_image(rng, 4, 4);
  EXPECT_EQ(ncc_cost(a, a, 3, 0, {1, 0}, 1, 0.8), 0.8);
  EXPECT_EQ(ncc_cost(a, a, 0, 0, {0, -1}, 1, 0.8), 0.8);
}

TEST(NccCost, FlatPatchConvention) {
  const Image flat(5, 5, 0.4f);
  std::mt19937 rng(4);
  const Image tex = random_image(rng, 5, 5);
  EXPECT_EQ(ncc_cost(flat, flat, 2, 2, {0, 0}, 1, 1.0), 1.0);
  EXPECT_EQ(ncc_cost(flat, tex, 2, 2, {0, 0}, 1, 1.0), 1.0);
  EXPECT_EQ(ncc_cost(tex, flat, 2, 2, {0, 0}, 1, 1.0), 1.0);
}

TEST(NccCost, MatchesReferenceIncludingBorders) {
  std::mt19937 rng(5);
  const Image a = random_image(rng, 8, 8), b = random_image(rng, 8, 8);
  for (int r : {1, 2})
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx)
            EXPECT_NEAR(ncc_cost(a, b, x, y, {dx, dy}, r, 0.7), reference_ncc(a, b, x, y, {dx, dy}, r, 0.7), 1e-12);
}

TEST(NccCost, AffineInvariance) {
  std::mt19937 rng(6);
  const Image a = random_image(rng, 9, 9), b = random_image(rng, 9, 9);
  Image b2 = b;
  for (auto& v : b2.data()) v = 0.4f * v + 0.3f;
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 8; ++x)
      for (Displacement s : {Displacement{0, 0}, Displacement{1, -1}, Displacement{-1, 0}})
        EXPECT_NEAR(ncc_cost(a, b, x, y, s, 1, 1.0), ncc_cost(a, b2, x, y, s, 1, 1.0), 1e-6);
}

TEST(NccCost, RangeProperty) {
  std::mt19937 rng(7);
  const Image a = random_image(rng, 10, 10), b = random_image(rng, 10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int k = 0; k < 9; ++k) {
        const double c = ncc_cost(a, b, x, y, {k % 3 - 1, k / 3 - 1}, 1, 1.0);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
      }
}

TEST(HsCost, Examples) {
  Image a(2, 1), b(2, 1);
  for (int c = 0; c < 3; ++c) {
    a.at(0, 0, c) = 1.0f;
    b.at(1, 0, c) = 0.0f;
    b.at(0, 0, c) = 1.0f;
  }
  EXPECT_EQ(hs_cost(a, b, 0, 0, {0, 0}, 0.8), 0.0);
  EXPECT_EQ(hs_cost(a, b, 0, 0, {1, 0}, 0.8), 3.0);
  EXPECT_EQ(hs_cost(a, b, 0, 0, {-1, 0}, 0.8), 0.8);
  EXPECT_EQ(hs_cost(a, b, 1, 0, {0, 1}, 0.8), 0.8);
}

TEST(CostVolume, SinglePixelNcc) {
  SolverConfig cfg;
  cfg.radius = 0;
  const Image img(1, 1, 0.5f);
  const CostVolume v = build_cost_volume(img, img, cfg);
  ASSERT_EQ(v.values.size(), 1u);
  EXPECT_EQ(v.values[0], 1.0f);
}

TEST(CostVolume, SelfMatchInterior) {
  std::mt19937 rng(8);
  const Image img = random_image(rng, 4, 4);
  SolverConfig cfg;
  cfg.radius = 1;
  const CostVolume v = build_cost_volume(img, img, cfg);
  const int zero = v.labels.index(0, 0);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) EXPECT_NEAR(v.at(x, y, zero), 0.0f, 1e-6);
}

TEST(CostVolume, EveryEntryMatchesScalarEvaluation) {
  std::mt19937 rng(9);
  const Image a = random_image(rng, 8, 8), b = random_image(rng, 8, 8);
  for (DataTerm term : {DataTerm::TruncatedNCC, DataTerm::PixelwiseHS}) {
    SolverConfig cfg;
    cfg.radius = 2;
    cfg.zeta = 0.65;
    cfg.data_term = term;
    const CostVolume v = build_cost_volume(a, b, cfg);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int k = 0; k < v.labels.size(); ++k) {
          const Displacement s = v.labels.displacement(k);
          const double expected =
              term == DataTerm::TruncatedNCC ? reference_ncc(a, b, x, y, s, 1, 0.65) : hs_cost(a, b, x, y, s, 0.65);
          ASSERT_NEAR(v.at(x, y, k), expected, 1e-6);
        }
  }
}

TEST(CostVolume, BufferCountMatchesAnalytic) {
  std::mt19937 rng(10);
  const Image a = random_image(rng, 7, 5);
  SolverConfig cfg;
  cfg.radius = 3;
  cfg.zeta = 0.123f;  // float exact value
  const CostVolume v = build_cost_volume(a, a, cfg);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      // labels whose target lies outside, counted per axis
      int in_x = 0, in_y = 0;
      for (int d = -3; d <= 3; ++d) {
        in_x += (x + d >= 0 && x + d < 7);
        in_y += (y + d >= 0 && y + d < 5);
      }
      const int expected_out = 49 - in_x * in_y;
      int out = 0;
      for (int k = 0; k < 49; ++k) {
        const Displacement s = v.labels.displacement(k);
        if (!a.contains(x + s.dx, y + s.dy)) {
          ++out;
          EXPECT_EQ(v.at(x, y, k), static_cast<float>(cfg.zeta));
        }
      }
      EXPECT_EQ(out, expected_out);
    }
}

TEST(CostVolume, ThreadCountDoesNotChangeValues) {
  std::mt19937 rng(11);
  const Image a = random_image(rng, 23, 17), b = random_image(rng, 23, 17);
  SolverConfig cfg;
  cfg.radius = 3;
  cfg.threads = 1;
  const CostVolume one = build_cost_volume(a, b, cfg);
  for (int t : {2, 4, 7}) {
    cfg.threads = t;
    EXPECT_EQ(build_cost_volume(a, b, cfg).values, one.values);
  }
}

TEST(CostVolume, MemoryCap) {
  const Image a(10, 10, 0.5f);
  SolverConfig cfg;
  cfg.radius = 2;
  cfg.memory_cap_bytes = 1000;
  try {
    build_cost_volume(a, a, cfg);
    FAIL() << "expected ResourceError";
  } catch (const ResourceError& e) {
    EXPECT_EQ(e.required_bytes(), 100u * 25u * 4u);
    EXPECT_NE(std::string(e.what()).find("10000"), std::string::npos);
  }
}

TEST(CostVolume, SizeMismatch) {
  EXPECT_THROW(build_cost_volume(Image(3, 3), Image(3, 4), SolverConfig{}), InputError);
}

TEST(EdgeWeights, ConstantImage) {
  const EdgeWeights w = build_edge_weights(Image(5, 4, 0.3f), 0.1);
  EXPECT_EQ(w.horizontal.size(), 4u * 4u);
  EXPECT_EQ(w.vertical.size(), 5u * 3u);
  for (double v : w.horizontal) EXPECT_EQ(v, 1.0);
  for (double v : w.vertical) EXPECT_EQ(v, 1.0);
}

TEST(EdgeWeights, DistanceEqualToBeta) {
  Image img(2, 1, 0.0f);
  img.at(1, 0, 0) = 0.25f;
  const EdgeWeights w = build_edge_weights(img, 0.25);
  EXPECT_NEAR(w.right(0, 0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(w.right(0, 0), 0.3679, 1e-4);
}

TEST(EdgeWeights, TwoTone) {
  Image img(2, 2, 0.0f);
  for (int c = 0; c < 3; ++c) {
    img.at(1, 0, c) = 1.0f;
    img.at(1, 1, c) = 1.0f;
  }
  const EdgeWeights w = build_edge_weights(img, 0.5);
  EXPECT_NEAR(w.right(0, 0), std::exp(-2.0 * std::sqrt(3.0)), 1e-12);
  EXPECT_NEAR(w.right(0, 1), std::exp(-2.0 * std::sqrt(3.0)), 1e-12);
  EXPECT_EQ(w.down(0, 0), 1.0);
  EXPECT_EQ(w.down(1, 0), 1.0);
}

TEST(EdgeWeights, RangeProperty) {
  std::mt19937 rng(12);
  const EdgeWeights w = build_edge_weights(random_image(rng, 9, 7), 0.1);
  for (double v : w.horizontal) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (double v : w.vertical) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(build_edge_weights(Image(2, 2), 0.0), InputError);
}
