#pragma once

// Unary potentials for every (pixel, displacement) pair and the Laplace edge
// weights of the 4-connected grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

// theta_p(s) for every pixel p and label s, pixel-major.
struct CostVolume {
  int width = 0;
  int height = 0;
  LabelSpace labels;
  std::vector<float> values;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * labels.size();
  }
  std::span<const float> costs(int x, int y) const {
    return {values.data() + offset(x, y), static_cast<std::size_t>(labels.size())};
  }
  std::span<float> costs(int x, int y) {
    return {values.data() + offset(x, y), static_cast<std::size_t>(labels.size())};
  }
  float at(int x, int y, int label) const { return values[offset(x, y) + label]; }
};

inline std::size_t cost_volume_bytes(int width, int height, const LabelSpace& labels) {
  return static_cast<std::size_t>(width) * height * labels.size() * sizeof(float);
}

// Laplace weights w = exp(-|I(p) - I(q)| / beta) for horizontal edges
// (x,y)-(x+1,y) and vertical edges (x,y)-(x,y+1).
struct EdgeWeights {
  int width = 0;
  int height = 0;
  std::vector<double> horizontal;  // (width - 1) * height
  std::vector<double> vertical;    // width * (height - 1)

  double right(int x, int y) const { return horizontal[static_cast<std::size_t>(y) * (width - 1) + x]; }
  double down(int x, int y) const { return vertical[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline void check_same_size(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InputError("image sizes differ: " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
}

inline constexpr double kFlatVariance = 1e-12;

// Centered samples of the (2r+1)^2 patch around (x, y), channel-major, with
// per-channel norms. Samples outside the image are clamped to the edge.

inline void centered_patch(const Image& img, int x, int y, int r, double* samples, double* norm,
                           bool* flat) {
  const int side = 2 * r + 1;
  const int n = side * side;
  for (int c = 0; c < Image::kChannels; ++c) {
    double* s = samples + c * n;
    double mean = 0.0;
    int k = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        s[k] = img.clamped(x + dx, y + dy, c);
        mean += s[k++];
      }
    mean /= n;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      s[i] -= mean;
      sq += s[i] * s[i];
    }
    flat[c] = sq / n < kFlatVariance;
    norm[c] = std::sqrt(sq);
  }
}

// 1 - max(mean over channels of NCC, 0), clamped to [0, 1]. A channel where
// either patch is flat contributes NCC = 0.
inline double ncc_from_patches(const double* a, const double* a_norm, const bool* a_flat,
                               const double* b, const double* b_norm, const bool* b_flat, int n) {
  double ncc = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    if (a_flat[c] || b_flat[c]) continue;
    const double* pa = a + c * n;
    const double* pb = b + c * n;
    double cross = 0.0;
    for (int i = 0; i < n; ++i) cross += pa[i] * pb[i];
    ncc += cross / (a_norm[c] * b_norm[c]);
  }
  ncc /= Image::kChannels;
  const double cost = 1.0 - std::max(ncc, 0.0);
  return std::clamp(cost, 0.0, 1.0);
}

}  // namespace detail

// Truncated NCC data term. The buffer-zone constant zeta applies when the
// displaced centre leaves I2; patch samples near borders are clamped.
inline double ncc_cost(const Image& I1, const Image& I2, int x, int y, Displacement s,
                       int patch_radius, double zeta) {
  const int tx = x + s.dx, ty = y + s.dy;
  if (!I2.contains(tx, ty)) return zeta;
  const int side = 2 * patch_radius + 1;
  const int n = side * side;
  std::vector<double> a(n * Image::kChannels), b(n * Image::kChannels);
  double na[3], nb[3];
  bool fa[3], fb[3];
  detail::centered_patch(I1, x, y, patch_radius, a.data(), na, fa);
  detail::centered_patch(I2, tx, ty, patch_radius, b.data(), nb, fb);
  return detail::ncc_from_patches(a.data(), na, fa, b.data(), nb, fb, n);
}

// Pixelwise squared RGB distance.
inline double hs_cost(const Image& I1, const Image& I2, int x, int y, Displacement s, double zeta) {
  const int tx = x + s.dx, ty = y + s.dy;
  if (!I2.contains(tx, ty)) return zeta;
  double sum = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    const double d = static_cast<double>(I1.at(x, y, c)) - I2.at(tx, ty, c);
    sum += d * d;
  }
  return sum;
}

namespace detail {

// Per-pixel centered patches of a whole image.
struct PatchPlane {
  int n = 0;
  std::vector<double> samples;
  std::vector<double> norms;
  std::vector<char> flats;

  PatchPlane(const Image& img, int r, int threads) {
    const int side = 2 * r + 1;
    n = side * side;
    const std::size_t pixels = img.pixel_count();
    samples.resize(pixels * n * Image::kChannels);
    norms.resize(pixels * Image::kChannels);
    flats.resize(pixels * Image::kChannels);
    const int w = img.width(), h = img.height();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        bool flat[Image::kChannels];
        centered_patch(img, x, y, r, samples.data() + p * n * Image::kChannels,
                       norms.data() + p * Image::kChannels, flat);
        for (int c = 0; c < Image::kChannels; ++c) flats[p * Image::kChannels + c] = flat[c];
      }
    }
  }

  const double* patch(std::size_t p) const { return samples.data() + p * n * Image::kChannels; }
  const double* norm(std::size_t p) const { return norms.data() + p * Image::kChannels; }
  void flat(std::size_t p, bool out[Image::kChannels]) const {
    for (int c = 0; c < Image::kChannels; ++c) out[c] = flats[p * Image::kChannels + c] != 0;
  }
};

}  // namespace detail

// Fills theta_p(s) for every pixel and label with the configured data term.
// Throws ResourceError when the volume would exceed cfg.memory_cap_bytes.
inline CostVolume build_cost_volume(const Image& I1, const Image& I2, const SolverConfig& cfg) {
  detail::check_same_size(I1, I2);
  const LabelSpace labels = cfg.labels();
  const std::size_t bytes = cost_volume_bytes(I1.width(), I1.height(), labels);
  if (bytes > cfg.memory_cap_bytes)
    throw ResourceError("cost volume needs " + std::to_string(bytes) + " bytes, cap is " +
                            std::to_string(cfg.memory_cap_bytes),
                        bytes);

  CostVolume vol;
  vol.width = I1.width();
  vol.height = I1.height();
  vol.labels = labels;
  vol.values.resize(vol.pixel_count() * labels.size());
  const int w = vol.width, h = vol.height, m = labels.size();

  if (cfg.data_term == DataTerm::PixelwiseHS) {
#pragma omp parallel for schedule(static) num_threads(cfg.threads)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float* out = vol.values.data() + vol.offset(x, y);
        for (int k = 0; k < m; ++k)
          out[k] = static_cast<float>(hs_cost(I1, I2, x, y, labels.displacement(k), cfg.zeta));
      }
    return vol;
  }

  const detail::PatchPlane P1(I1, cfg.patch_radius, cfg.threads);
  const detail::PatchPlane P2(I2, cfg.patch_radius, cfg.threads);
  const float zeta = static_cast<float>(cfg.zeta);
#pragma omp parallel for schedule(static) num_threads(cfg.threads)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      bool fa[Image::kChannels], fb[Image::kChannels];
      P1.flat(p, fa);
      float* out = vol.values.data() + vol.offset(x, y);
      for (int k = 0; k < m; ++k) {
        const Displacement s = labels.displacement(k);
        const int tx = x + s.dx, ty = y + s.dy;
        if (!I2.contains(tx, ty)) {
          out[k] = zeta;
          continue;
        }
        const std::size_t q = static_cast<std::size_t>(ty) * w + tx;
        P2.flat(q, fb);
        out[k] = static_cast<float>(detail::ncc_from_patches(P1.patch(p), P1.norm(p), fa,
                                                             P2.patch(q), P2.norm(q), fb, P1.n));
      }
    }
  }
  return vol;
}

inline EdgeWeights build_edge_weights(const Image& I1, double beta) {
  if (!(beta > 0.0)) throw InputError("edge weights: beta must be positive");
  EdgeWeights ew;
  ew.width = I1.width();
  ew.height = I1.height();
  const int w = ew.width, h = ew.height;
  auto weight = [&](int x0, int y0, int x1, int y1) {
    double sq = 0.0;
    for (int c = 0; c < Image::kChannels; ++c) {
      const double d = static_cast<double>(I1.at(x0, y0, c)) - I1.at(x1, y1, c);
      sq += d * d;
    }
    return std::exp(-std::sqrt(sq) / beta);
  };
  ew.horizontal.resize(static_cast<std::size_t>(std::max(w - 1, 0)) * h);
  ew.vertical.resize(static_cast<std::size_t>(w) * std::max(h - 1, 0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) ew.horizontal[static_cast<std::size_t>(y) * (w - 1) + x] = weight(x, y, x + 1, y);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) ew.vertical[static_cast<std::size_t>(y) * w + x] = weight(x, y, x, y + 1);
  return ew;
}

}  // namespace fullflow
