#pragma once

// Min-convolution kernels h(i) = min_j g(j) + rho(i - j).
//
// Three linear-time 1D kernels are provided: the two-pass L1 distance
// transform, the lower envelope of parabolas for squared L2, and SMAWK row
// minima search for any convex rho. minconv2d composes them into the
// separable, optionally truncated 2D transform used by message updates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

// Finite stand-in for +infinity. Arithmetic on it never produces NaN and
// anything at or above kInfinityThreshold is treated as infinite.
inline constexpr double kInfinity = 1e30;
inline constexpr double kInfinityThreshold = 1e29;

inline bool is_infinite(double v) { return v >= kInfinityThreshold; }

//////////////////////////////////////////////////////////////////////
// Brute force

// Theta(n^2) reference. Ties resolve to the smallest j.
template <class T, class Rho>
void minconv_brute(std::span<const T> g, const Rho& rho, std::span<T> h,
                   std::span<int> ind = {}) {
  const int n = static_cast<int>(g.size());
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int j = 0; j < n; ++j) {
      const double v = static_cast<double>(g[j]) + rho(i - j);
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    h[i] = static_cast<T>(best);
    if (!ind.empty()) ind[i] = arg;
  }
}

template <class Rho>
std::vector<double> minconv_brute(std::span<const double> g, const Rho& rho) {
  std::vector<double> h(g.size());
  minconv_brute<double>(g, rho, std::span<double>(h));
  return h;
}

//////////////////////////////////////////////////////////////////////
// L1 distance transform

// rho(x) = slope * |x|. h may alias g.
template <class T>
void dt_l1(std::span<const T> g, double slope, std::span<T> h) {
  const std::size_t n = g.size();
  if (n == 0) return;
  const T s = static_cast<T>(slope);
  h[0] = g[0];
  for (std::size_t i = 1; i < n; ++i) h[i] = std::min(g[i], static_cast<T>(h[i - 1] + s));
  for (std::size_t i = n - 1; i-- > 0;) h[i] = std::min(h[i], static_cast<T>(h[i + 1] + s));
}

inline std::vector<double> dt_l1(std::span<const double> g, double slope) {
  std::vector<double> h(g.size());
  dt_l1<double>(g, slope, std::span<double>(h));
  return h;
}

//////////////////////////////////////////////////////////////////////
// Squared L2 distance transform

struct ParabolaEnvelope {
  std::vector<int> vertex;
  std::vector<double> boundary;
};

// rho(x) = weight * x^2, by the lower envelope of parabolas rooted at each
// g(j). h must not alias g.
template <class T>
void dt_quadratic(std::span<const T> g, double weight, std::span<T> h, ParabolaEnvelope& env) {
  const int n = static_cast<int>(g.size());
  if (n == 0) return;
  env.vertex.resize(n);
  env.boundary.resize(n + 1);
  auto& v = env.vertex;
  auto& z = env.boundary;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](int q, int p) {
    const double fq = static_cast<double>(g[q]) + weight * q * q;
    const double fp = static_cast<double>(g[p]) + weight * p * p;
    return (fq - fp) / (2.0 * weight * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    // z[0] is -inf, so k never drops below zero
    while (s <= z[k]) s = intersect(q, v[--k]);
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    h[q] = static_cast<T>(weight * d * d + static_cast<double>(g[v[k]]));
  }
}

inline std::vector<double> dt_quadratic(std::span<const double> g, double weight) {
  std::vector<double> h(g.size());
  ParabolaEnvelope env;
  dt_quadratic<double>(g, weight, std::span<double>(h), env);
  return h;
}

//////////////////////////////////////////////////////////////////////
// SMAWK

// Row minima of the implicit n x n matrix A(i, j) = g(j) + rho(i - j) for
// convex rho. A is never materialized. Each level keeps every other row of
// the previous one, REDUCE discards columns that cannot hold a row minimum,
// and the skipped rows are filled in afterwards between the known minima of
// their neighbours. Ties go to the smallest column.
//
// The workspace is reusable across calls of any size; it performs no
// convexity check (see SmawkMinConv for the checked entry point).
class SmawkWorkspace {
 public:
  template <class T, class Rho>
  void row_minima(std::span<const T> g, const Rho& rho, std::span<T> h, std::span<int> ind) {
    const int n = static_cast<int>(g.size());
    if (n == 0) return;
    auto entry = [&](int i, int j) {
      ++evaluations_;
      return static_cast<double>(g[j]) + rho(i - j);
    };

    // Down phase: level k holds rows start_k + t * stride_k.
    level_start_.clear();
    level_offset_.clear();
    cols_.clear();
    hval_.assign(n, 0.0);
    stack_val_.resize(n);
    std::size_t in_begin = 0, in_end = 0;
    // level 0 input columns are 0..n-1, stored at the front of cols_
    for (int j = 0; j < n; ++j) cols_.push_back(j);
    in_end = cols_.size();
    int start = 0, stride = 1, rows = n;
    while (rows > 0) {
      const std::size_t out_begin = cols_.size();
      cols_.resize(out_begin + rows);
      int sz = 0;
      // REDUCE only pays off when there are more columns than rows
      if (in_end - in_begin <= static_cast<std::size_t>(rows)) {
        for (std::size_t c = in_begin; c < in_end; ++c) cols_[out_begin + sz++] = cols_[c];
        in_begin = in_end;
      }
      for (std::size_t c = in_begin; c < in_end; ++c) {
        const int col = cols_[c];
        while (sz > 0) {
          const int r = start + (sz - 1) * stride;
          double& top = stack_val_[sz - 1];
          if (std::isnan(top)) top = entry(r, cols_[out_begin + sz - 1]);
          if (top <= entry(r, col)) break;
          --sz;
        }
        if (sz < rows) {
          cols_[out_begin + sz] = col;
          stack_val_[sz] = std::numeric_limits<double>::quiet_NaN();
          ++sz;
        }
      }
      cols_.resize(out_begin + sz);
      level_start_.push_back(start);
      level_offset_.push_back(out_begin);
      in_begin = out_begin;
      in_end = cols_.size();
      start += stride;
      stride *= 2;
      rows /= 2;
    }
    level_offset_.push_back(cols_.size());

    // Up phase: fill the even rows of each level from the deepest upwards.
    for (int level = static_cast<int>(level_start_.size()) - 1; level >= 0; --level) {
      const int lstart = level_start_[level];
      const int lstride = 1 << level;
      const int lrows = lstart < n ? (n - 1 - lstart) / lstride + 1 : 0;
      const std::size_t cb = level_offset_[level], ce = level_offset_[level + 1];
      std::size_t j = cb;
      for (int t = 0; t < lrows; t += 2) {
        const int row = lstart + t * lstride;
        const int last = (t + 1 < lrows) ? ind[row + lstride] : cols_[ce - 1];
        int best = cols_[j];
        double best_val = entry(row, best);
        while (cols_[j] != last) {
          ++j;
          const double v = entry(row, cols_[j]);
          if (v < best_val) {
            best_val = v;
            best = cols_[j];
          }
        }
        ind[row] = best;
        hval_[row] = best_val;
      }
    }
    for (int i = 0; i < n; ++i) h[i] = static_cast<T>(hval_[i]);
  }

  std::size_t evaluations() const { return evaluations_; }
  void reset_evaluations() { evaluations_ = 0; }

 private:
  std::vector<int> cols_;
  std::vector<int> level_start_;
  std::vector<std::size_t> level_offset_;
  std::vector<double> stack_val_;
  std::vector<double> hval_;
  std::size_t evaluations_ = 0;
};

// SMAWK min-convolution bound to one penalty and length. Construction
// rejects rho that is not discretely convex on [-(n-1), n-1].
template <class Rho>
class SmawkMinConv {
 public:
  SmawkMinConv(Rho rho, int n) : rho_(std::move(rho)), n_(n) {
    if (n < 1) throw InputError("smawk: length must be >= 1");
    if (!is_discretely_convex(rho_, n - 1))
      throw InputError("smawk: penalty is not convex on [-" + std::to_string(n - 1) + ", " +
                       std::to_string(n - 1) + "]");
  }

  int size() const { return n_; }

  template <class T>
  void operator()(std::span<const T> g, std::span<T> h, std::span<int> ind) {
    if (static_cast<int>(g.size()) != n_) throw InputError("smawk: input length mismatch");
    ws_.row_minima(g, rho_, h, ind);
  }

  struct Result {
    std::vector<double> h;
    std::vector<int> ind;
  };
  Result operator()(std::span<const double> g) {
    Result r{std::vector<double>(g.size()), std::vector<int>(g.size())};
    (*this)(g, std::span<double>(r.h), std::span<int>(r.ind));
    return r;
  }

  std::size_t evaluations() const { return ws_.evaluations(); }
  void reset_evaluations() { ws_.reset_evaluations(); }

 private:
  Rho rho_;
  int n_;
  SmawkWorkspace ws_;
};

//////////////////////////////////////////////////////////////////////
// 2D min-convolution

enum class MinConvKernel {
  Auto,   // L1 -> dt_l1, SquaredL2 -> dt_quadratic, Charbonnier -> SMAWK
  Smawk,  // SMAWK for every penalty
  Brute,  // quadratic 1D passes
};

struct MinConvWorkspace {
  std::vector<double> plane;
  std::vector<double> line_in;
  std::vector<double> line_out;
  std::vector<double> table;
  std::vector<int> ind;
  ParabolaEnvelope envelope;
  SmawkWorkspace smawk;
};

namespace detail {

struct TableRho {
  const double* center;
  double operator()(int x) const { return center[x]; }
};

inline void minconv_line(std::span<const double> g, std::span<double> h, const Penalty& rho,
                         double weight, MinConvKernel kernel, MinConvWorkspace& ws) {
  const int n = static_cast<int>(g.size());
  if (kernel == MinConvKernel::Auto) {
    if (rho.kind == PenaltyKind::L1) return dt_l1<double>(g, weight, h);
    if (rho.kind == PenaltyKind::SquaredL2) return dt_quadratic<double>(g, weight, h, ws.envelope);
  }
  const TableRho table{ws.table.data() + (n - 1)};
  if (kernel == MinConvKernel::Brute) return minconv_brute<double>(g, table, h);
  ws.ind.resize(n);
  ws.smawk.row_minima<double>(g, table, h, std::span<int>(ws.ind));
}

}  // namespace detail

// m(t) = min(D(t), T) where
//   D(t) = min_s phi(s) + weight * (rho(t1 - s1) + rho(t2 - s2))
//   T    = min_s phi(s) + weight * tau     (skipped when tau is infinite)
// D is evaluated as 1D transforms along each label row (fixed s2) followed by
// 1D transforms along each label column. out may alias phi.
template <class T>
void minconv2d(std::span<const T> phi, const LabelSpace& labels, const Penalty& rho,
               double weight, double tau, std::span<T> out, MinConvWorkspace& ws,
               MinConvKernel kernel = MinConvKernel::Auto) {
  const int n = labels.side();
  const std::size_t m = static_cast<std::size_t>(labels.size());
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) lowest = std::min(lowest, static_cast<double>(phi[k]));

  if (!(weight > 0.0)) {
    std::fill(out.begin(), out.begin() + m, static_cast<T>(lowest));
    return;
  }

  if (kernel != MinConvKernel::Auto || rho.kind == PenaltyKind::Charbonnier) {
    ws.table.resize(2 * n - 1);
    for (int x = -(n - 1); x <= n - 1; ++x) ws.table[x + n - 1] = weight * rho(x);
  }
  ws.plane.resize(m);
  ws.line_in.resize(n);
  ws.line_out.resize(n);
  const std::span<double> in(ws.line_in), line(ws.line_out);

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) in[c] = static_cast<double>(phi[r * n + c]);
    detail::minconv_line(in, line, rho, weight, kernel, ws);
    std::copy(line.begin(), line.end(), ws.plane.begin() + r * n);
  }
  const double cap = std::isfinite(tau) ? lowest + weight * tau : std::numeric_limits<double>::infinity();
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) in[r] = ws.plane[r * n + c];
    detail::minconv_line(in, line, rho, weight, kernel, ws);
    for (int r = 0; r < n; ++r) out[r * n + c] = static_cast<T>(std::min(line[r], cap));
  }
}

inline std::vector<double> minconv2d(std::span<const double> phi, const LabelSpace& labels,
                                     const Penalty& rho, double weight, double tau,
                                     MinConvKernel kernel = MinConvKernel::Auto) {
  std::vector<double> out(phi.size());
  MinConvWorkspace ws;
  minconv2d<double>(phi, labels, rho, weight, tau, std::span<double>(out), ws, kernel);
  return out;
}

// Direct Theta(M^2) evaluation of the truncated 2D transform. Used by the
// benchmark as the quadratic baseline.
template <class T>
void minconv2d_direct(std::span<const T> phi, const LabelSpace& labels, const Penalty& rho,
                      double weight, double tau, std::span<T> out) {
  const int m = labels.size();
  for (int t = 0; t < m; ++t) {
    const Displacement dt = labels.displacement(t);
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < m; ++s) {
      const Displacement ds = labels.displacement(s);
      const double v = static_cast<double>(phi[s]) +
                       weight * pairwise_penalty(rho, tau, {dt.dx - ds.dx, dt.dy - ds.dy});
      best = std::min(best, v);
    }
    out[t] = static_cast<T>(best);
  }
}

}  // namespace fullflow
