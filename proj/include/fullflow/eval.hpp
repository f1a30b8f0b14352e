#pragma once

// Endpoint-error metrics and flow / error visualizations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

// A flow vector is an outlier when its endpoint error is 3 pixels or more.
inline constexpr double kOutlierEpe = 3.0;
// Error maps saturate here.
inline constexpr double kErrorMapCap = 10.0;

using PixelMask = std::vector<std::uint8_t>;

struct FlowMetrics {
  double epe_all = 0.0;
  std::vector<double> epe_masked;  // one entry per supplied mask
  double outlier_rate = 0.0;
  std::size_t evaluated = 0;
  std::vector<float> per_pixel_epe;  // NaN where the pixel is not evaluated
};

// EPE statistics over pixels with valid ground truth. With `consistent_only`
// pixels the estimate marks invalid are skipped as well.
inline FlowMetrics compute_metrics(const FlowField& flow, const FlowField& gt,
                                   std::span<const PixelMask> masks = {},
                                   bool consistent_only = false) {
  if (flow.width != gt.width || flow.height != gt.height)
    throw InputError("metrics: flow is " + std::to_string(flow.width) + "x" + std::to_string(flow.height) +
                     " but ground truth is " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
  for (const auto& mask : masks)
    if (mask.size() != flow.size()) throw InputError("metrics: mask size does not match flow");

  FlowMetrics m;
  m.per_pixel_epe.assign(flow.size(), std::numeric_limits<float>::quiet_NaN());
  std::vector<double> mask_sum(masks.size(), 0.0);
  std::vector<std::size_t> mask_count(masks.size(), 0);
  double sum = 0.0;
  std::size_t outliers = 0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!gt.valid[i]) continue;
    if (consistent_only && !flow.valid[i]) continue;
    const double du = static_cast<double>(flow.u[i]) - gt.u[i];
    const double dv = static_cast<double>(flow.v[i]) - gt.v[i];
    const double epe = std::sqrt(du * du + dv * dv);
    m.per_pixel_epe[i] = static_cast<float>(epe);
    sum += epe;
    ++m.evaluated;
    if (epe >= kOutlierEpe) ++outliers;
    for (std::size_t k = 0; k < masks.size(); ++k)
      if (masks[k][i]) {
        mask_sum[k] += epe;
        ++mask_count[k];
      }
  }
  if (m.evaluated > 0) {
    m.epe_all = sum / m.evaluated;
    m.outlier_rate = static_cast<double>(outliers) / m.evaluated;
  }
  m.epe_masked.resize(masks.size());
  for (std::size_t k = 0; k < masks.size(); ++k)
    m.epe_masked[k] = mask_count[k] ? mask_sum[k] / mask_count[k] : 0.0;
  return m;
}

namespace detail {

// HSV with V = 1; hue in degrees.
inline void hsv_to_rgb(double hue, double sat, float rgb[3]) {
  hue = std::fmod(hue, 360.0);
  if (hue < 0) hue += 360.0;
  const double c = sat;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = 1.0 - c;
  rgb[0] = static_cast<float>(r + m);
  rgb[1] = static_cast<float>(g + m);
  rgb[2] = static_cast<float>(b + m);
}

}  // namespace detail

// Hue of the flow direction in degrees, [0, 360).
inline double flow_hue(double u, double v) {
  double deg = std::atan2(v, u) * 180.0 / std::numbers::pi;
  if (deg < 0) deg += 360.0;
  return deg;
}

// Color-wheel rendering: hue follows atan2(v, u), saturation grows with
// magnitude up to max_magnitude (<= 0 picks the largest valid magnitude).
// Zero flow is white, invalid pixels black.
inline Image flow_to_color(const FlowField& flow, double max_magnitude = 0.0) {
  if (!(max_magnitude > 0.0)) {
    max_magnitude = 0.0;
    for (std::size_t i = 0; i < flow.size(); ++i)
      if (flow.valid[i]) max_magnitude = std::max(max_magnitude, std::hypot(double(flow.u[i]), double(flow.v[i])));
    if (max_magnitude == 0.0) max_magnitude = 1.0;
  }
  Image img(flow.width, flow.height);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const auto i = flow.index(x, y);
      if (!flow.valid[i]) continue;
      const double u = flow.u[i], v = flow.v[i];
      const double sat = std::min(std::hypot(u, v) / max_magnitude, 1.0);
      float rgb[3];
      detail::hsv_to_rgb(flow_hue(u, v), sat, rgb);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
    }
  return img;
}

// EPE map truncated at kErrorMapCap, black through red and yellow to white.
// Pixels without an error value are dark blue.
inline Image error_map(const FlowMetrics& metrics, int width, int height) {
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const float e = metrics.per_pixel_epe[static_cast<std::size_t>(y) * width + x];
      if (std::isnan(e)) {
        img.at(x, y, 2) = 0.3f;
        continue;
      }
      const double t = std::min(static_cast<double>(e), kErrorMapCap) / kErrorMapCap;
      img.at(x, y, 0) = static_cast<float>(std::clamp(3.0 * t, 0.0, 1.0));
      img.at(x, y, 1) = static_cast<float>(std::clamp(3.0 * t - 1.0, 0.0, 1.0));
      img.at(x, y, 2) = static_cast<float>(std::clamp(3.0 * t - 2.0, 0.0, 1.0));
    }
  return img;
}

}  // namespace fullflow
