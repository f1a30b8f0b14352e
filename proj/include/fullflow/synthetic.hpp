#pragma once

// Procedural test imagery: multi-scale value-noise textures, translated
// pairs with known flow, noise and brightness changes.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

// Sum of bilinear value-noise octaves with cell sizes 1, 2, 4, ... up to
// `coarsest`, normalized to [0,1] per channel.
inline Image random_texture(int width, int height, std::mt19937& rng, int coarsest = 8) {
  Image img(width, height);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> acc(img.data().size(), 0.0);
  double amplitude = 1.0;
  for (int cell = 1; cell <= coarsest; cell *= 2, amplitude *= 1.3) {
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh * Image::kChannels);
    for (auto& v : grid) v = unit(rng);
    auto g = [&](int gx, int gy, int c) { return grid[(static_cast<std::size_t>(gy) * gw + gx) * Image::kChannels + c]; };
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double fx = double(x) / cell, fy = double(y) / cell;
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const double tx = fx - x0, ty = fy - y0;
        for (int c = 0; c < Image::kChannels; ++c) {
          const double top = g(x0, y0, c) * (1 - tx) + g(x0 + 1, y0, c) * tx;
          const double bot = g(x0, y0 + 1, c) * (1 - tx) + g(x0 + 1, y0 + 1, c) * tx;
          acc[(static_cast<std::size_t>(y) * width + x) * Image::kChannels + c] += amplitude * (top * (1 - ty) + bot * ty);
        }
      }
  }
  for (int c = 0; c < Image::kChannels; ++c) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = c; i < acc.size(); i += Image::kChannels) {
      lo = std::min(lo, acc[i]);
      hi = std::max(hi, acc[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = c; i < acc.size(); i += Image::kChannels)
      img.data()[i] = static_cast<float>((acc[i] - lo) / span);
  }
  return img;
}

inline Image crop(const Image& src, int x0, int y0, int width, int height) {
  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = src.clamped(x0 + x, y0 + y, c);
  return out;
}

// Additive Gaussian noise, clamped to [0,1].
inline void add_noise(Image& img, double sigma, std::mt19937& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : img.data()) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
}

// v -> gain * v + bias, clamped to [0,1].
inline void apply_brightness(Image& img, double gain, double bias) {
  for (auto& v : img.data()) v = static_cast<float>(std::clamp(gain * v + bias, 0.0, 1.0));
}

struct SyntheticPair {
  Image image1, image2;
  FlowField truth;
};

// image2(p + (dx, dy)) = image1(p): both are windows of one larger texture, so
// content entering across the border is real texture rather than padding.
inline SyntheticPair translated_pair(int width, int height, int dx, int dy, double noise_sigma, unsigned seed,
                                     int coarsest = 8) {
  std::mt19937 rng(seed);
  const int margin = std::max(std::abs(dx), std::abs(dy)) + 1;
  const Image canvas = random_texture(width + 2 * margin, height + 2 * margin, rng, coarsest);
  SyntheticPair pair{crop(canvas, margin, margin, width, height),
                     crop(canvas, margin - dx, margin - dy, width, height), FlowField(width, height)};
  if (noise_sigma > 0) {
    add_noise(pair.image1, noise_sigma, rng);
    add_noise(pair.image2, noise_sigma, rng);
  }
  std::fill(pair.truth.u.begin(), pair.truth.u.end(), static_cast<float>(dx));
  std::fill(pair.truth.v.begin(), pair.truth.v.end(), static_cast<float>(dy));
  return pair;
}

}  // namespace fullflow
