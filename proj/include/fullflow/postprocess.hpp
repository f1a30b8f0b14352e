#pragma once

// Forward-backward consistency checking, a K-nearest-neighbour fill for
// invalidated pixels, and bilinear upscaling back to full resolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

using Point4 = std::array<double, 4>;

inline double squared_distance(const Point4& a, const Point4& b) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Match points (p, p + f_p) or (q + f'_q, q) of the valid pixels of a flow
// field, hashed into a uniform 4D grid. Radius queries are exact as long as
// the radius does not exceed the cell size.
class MatchPointSet {
 public:
  static MatchPointSet forward(const FlowField& flow, double cell) {
    MatchPointSet set(cell);
    for (int y = 0; y < flow.height; ++y)
      for (int x = 0; x < flow.width; ++x) {
        if (!flow.is_valid(x, y)) continue;
        const auto i = flow.index(x, y);
        set.insert({double(x), double(y), x + double(flow.u[i]), y + double(flow.v[i])});
      }
    return set;
  }

  static MatchPointSet backward(const FlowField& flow, double cell) {
    MatchPointSet set(cell);
    for (int y = 0; y < flow.height; ++y)
      for (int x = 0; x < flow.width; ++x) {
        if (!flow.is_valid(x, y)) continue;
        const auto i = flow.index(x, y);
        set.insert({x + double(flow.u[i]), y + double(flow.v[i]), double(x), double(y)});
      }
    return set;
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point4>& points() const { return points_; }
  double cell() const { return cell_; }

  // Smallest squared distance from `query` to a stored point, if one lies
  // strictly closer than `radius_sq`. Requires radius_sq <= cell^2.
  std::optional<double> nearest_within(const Point4& query, double radius_sq) const {
    const Key base = key_of(query);
    std::optional<double> best;
    Key k;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c)
          for (int d = -1; d <= 1; ++d) {
            k = {base[0] + a, base[1] + b, base[2] + c, base[3] + d};
            const auto it = cells_.find(k);
            if (it == cells_.end()) continue;
            for (std::size_t idx : it->second) {
              const double dist = squared_distance(points_[idx], query);
              if (dist < radius_sq && (!best || dist < *best)) best = dist;
            }
          }
    return best;
  }

 private:
  using Key = std::array<std::int64_t, 4>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (auto v : k) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };

  explicit MatchPointSet(double cell) : cell_(cell) {
    if (!(cell > 0.0)) throw InputError("match point set: cell size must be positive");
  }

  Key key_of(const Point4& p) const {
    Key k;
    for (int i = 0; i < 4; ++i) k[i] = static_cast<std::int64_t>(std::floor(p[i] / cell_));
    return k;
  }

  void insert(const Point4& p) {
    cells_[key_of(p)].push_back(points_.size());
    points_.push_back(p);
  }

  double cell_;
  std::vector<Point4> points_;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
};

// Keeps f_p only if some backward match (q + f'_q, q) lies within squared
// distance delta of (p, p + f_p). Pixels already invalid stay invalid; u and
// v are never modified.
inline FlowField consistency_check(const FlowField& fwd, const FlowField& bwd, double delta) {
  if (!(delta > 0.0)) throw InputError("consistency check: delta must be positive");
  const MatchPointSet targets = MatchPointSet::backward(bwd, std::sqrt(delta));
  FlowField out = fwd;
  for (int y = 0; y < fwd.height; ++y)
    for (int x = 0; x < fwd.width; ++x) {
      const auto i = fwd.index(x, y);
      if (!fwd.valid[i]) continue;
      const Point4 q{double(x), double(y), x + double(fwd.u[i]), y + double(fwd.v[i])};
      out.valid[i] = targets.nearest_within(q, delta).has_value() ? 1 : 0;
    }
  return out;
}

// Fills every invalid pixel with the inverse-distance weighted mean of the
// flow at its k nearest valid pixels (ties by raster index). Valid pixels are
// copied unchanged; the result is valid everywhere.
inline FlowField interpolate_fill(const FlowField& flow, int k = 16, int threads = 1) {
  if (k < 1) throw InputError("interpolate_fill: k must be >= 1");
  const std::size_t valid = flow.valid_count();
  if (valid == 0) throw InputError("interpolate_fill: no valid pixels to interpolate from");
  FlowField out = flow;
  std::fill(out.valid.begin(), out.valid.end(), 1);
  if (valid == flow.size()) return out;

  const int w = flow.width, h = flow.height;
  const int want = static_cast<int>(std::min<std::size_t>(k, valid));
  const int max_ring = std::max(w, h);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (int y = 0; y < h; ++y) {
    // max-heap on (squared distance, raster index)
    std::vector<std::pair<long, std::size_t>> heap;
    for (int x = 0; x < w; ++x) {
      if (flow.is_valid(x, y)) continue;
      heap.clear();
      auto consider = [&](int qx, int qy) {
        if (qx < 0 || qy < 0 || qx >= w || qy >= h || !flow.is_valid(qx, qy)) return;
        const long d2 = long(qx - x) * (qx - x) + long(qy - y) * (qy - y);
        const std::pair<long, std::size_t> cand{d2, flow.index(qx, qy)};
        if (static_cast<int>(heap.size()) < want) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      };
      for (int r = 1; r <= max_ring; ++r) {
        if (static_cast<int>(heap.size()) == want && long(r) * r > heap.front().first) break;
        for (int i = -r; i <= r; ++i) {
          consider(x + i, y - r);
          consider(x + i, y + r);
        }
        for (int i = -r + 1; i <= r - 1; ++i) {
          consider(x - r, y + i);
          consider(x + r, y + i);
        }
      }
      std::sort(heap.begin(), heap.end());
      double su = 0.0, sv = 0.0, sw = 0.0;
      for (const auto& [d2, idx] : heap) {
        const double wt = 1.0 / std::sqrt(static_cast<double>(d2));
        su += wt * flow.u[idx];
        sv += wt * flow.v[idx];
        sw += wt;
      }
      const auto i = flow.index(x, y);
      out.u[i] = static_cast<float>(su / sw);
      out.v[i] = static_cast<float>(sv / sw);
    }
  }
  return out;
}

// Bilinear upsampling to target_w x target_h with displacements multiplied by
// `scale`. Source pixel i sits at full-resolution coordinate
// scale * i + (scale - 1) / 2; samples beyond the outermost centres clamp.
inline FlowField upscale_flow(const FlowField& flow, int scale, int target_w, int target_h) {
  if (scale < 1) throw InputError("upscale_flow: scale must be >= 1");
  FlowField out(target_w, target_h);
  const double offset = (scale - 1) / 2.0;
  auto source = [&](int X, int limit, int& i0, int& i1, double& t) {
    double s = (X - offset) / scale;
    s = std::clamp(s, 0.0, static_cast<double>(limit - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, limit - 1);
    t = s - i0;
  };
  for (int Y = 0; Y < target_h; ++Y) {
    int y0, y1;
    double ty;
    source(Y, flow.height, y0, y1, ty);
    for (int X = 0; X < target_w; ++X) {
      int x0, x1;
      double tx;
      source(X, flow.width, x0, x1, tx);
      auto lerp2 = [&](const std::vector<float>& c) {
        const double a = c[flow.index(x0, y0)] * (1 - tx) + c[flow.index(x1, y0)] * tx;
        const double b = c[flow.index(x0, y1)] * (1 - tx) + c[flow.index(x1, y1)] * tx;
        return (a * (1 - ty) + b * ty) * scale;
      };
      const auto o = out.index(X, Y);
      out.u[o] = static_cast<float>(lerp2(flow.u));
      out.v[o] = static_cast<float>(lerp2(flow.v));
      const int nx = tx < 0.5 ? x0 : x1, ny = ty < 0.5 ? y0 : y1;
      out.valid[o] = flow.valid[flow.index(nx, ny)];
    }
  }
  return out;
}

// Surviving matches as "x1 y1 x2 y2" lines in full-resolution coordinates.
inline void write_matches(const FlowField& flow, int scale, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  const double offset = (scale - 1) / 2.0;
  os << std::setprecision(9);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      if (!flow.is_valid(x, y)) continue;
      const auto i = flow.index(x, y);
      const double x1 = scale * x + offset, y1 = scale * y + offset;
      os << x1 << ' ' << y1 << ' ' << x1 + scale * double(flow.u[i]) << ' '
         << y1 + scale * double(flow.v[i]) << '\n';
    }
  if (!os) throw InputError("failed writing '" + path + "'");
}

}  // namespace fullflow
