#pragma once

// Sequential tree-reweighted message passing (TRW-S) on the 4-connected
// pixel grid with the 2D displacement label space.
//
// Messages are updated in raster order (right and down) and then in reverse
// raster order (left and up); one forward-backward pair is an iteration.
// With more than one thread the same updates run as anti-diagonal
// wavefronts: a pixel's update reads only messages finalized earlier in the
// sweep and writes slots no other pixel on its diagonal touches, so the
// result is identical to the raster schedule.
//
// The lower bound is the sum of minima of the row-chain and column-chain
// subproblems of the current reparameterization, each chain carrying half of
// every node's reparameterized unary.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fullflow/core.hpp"
#include "fullflow/cost_volume.hpp"
#include "fullflow/minconv.hpp"

namespace fullflow {

enum class Direction : int { Left = 0, Right = 1, Up = 2, Down = 3 };

inline constexpr Direction kDirections[4] = {Direction::Left, Direction::Right, Direction::Up,
                                             Direction::Down};

inline Direction opposite(Direction d) {
  switch (d) {
    case Direction::Left:
      return Direction::Right;
    case Direction::Right:
      return Direction::Left;
    case Direction::Up:
      return Direction::Down;
    case Direction::Down:
      return Direction::Up;
  }
  return d;
}

inline int step_x(Direction d) { return d == Direction::Left ? -1 : (d == Direction::Right ? 1 : 0); }
inline int step_y(Direction d) { return d == Direction::Up ? -1 : (d == Direction::Down ? 1 : 0); }

struct IterationRecord {
  int iteration = 0;
  double lower_bound = 0.0;
  double seconds = 0.0;
};

// E(f) = sum_p theta_p(f_p) + lambda * sum_{pq} w_pq * rho_S(f_p - f_q) for a
// labeling given as label indices in raster order.
inline double energy(std::span<const int> labeling, const CostVolume& cost,
                     const EdgeWeights& weights, const SolverConfig& cfg) {
  const int w = cost.width, h = cost.height;
  const LabelSpace& ls = cost.labels;
  double unary = 0.0, pairwise = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = labeling[static_cast<std::size_t>(y) * w + x];
      unary += cost.at(x, y, l);
      const Displacement d = ls.displacement(l);
      if (x + 1 < w) {
        const Displacement e = ls.displacement(labeling[static_cast<std::size_t>(y) * w + x + 1]);
        pairwise += weights.right(x, y) * pairwise_penalty(cfg.penalty, cfg.tau, {d.dx - e.dx, d.dy - e.dy});
      }
      if (y + 1 < h) {
        const Displacement e = ls.displacement(labeling[static_cast<std::size_t>(y + 1) * w + x]);
        pairwise += weights.down(x, y) * pairwise_penalty(cfg.penalty, cfg.tau, {d.dx - e.dx, d.dy - e.dy});
      }
    }
  return unary + cfg.lambda * pairwise;
}

// Same objective for an integer flow field inside the label space.
inline double energy(const FlowField& flow, const CostVolume& cost, const EdgeWeights& weights,
                     const SolverConfig& cfg) {
  std::vector<int> labeling(flow.size());
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const Displacement d{static_cast<int>(std::lround(flow.u[i])), static_cast<int>(std::lround(flow.v[i]))};
    if (!cost.labels.contains(d)) throw InputError("energy: flow leaves the label space");
    labeling[i] = cost.labels.index(d);
  }
  return energy(labeling, cost, weights, cfg);
}

template <class Real = float>
class TrwsSolver {
 public:
  using Progress = std::function<void(const IterationRecord&)>;

  static std::size_t message_bytes(int width, int height, const LabelSpace& labels) {
    return std::size_t{4} * width * height * labels.size() * sizeof(Real);
  }

  TrwsSolver(const CostVolume& cost, const EdgeWeights& weights, const SolverConfig& cfg)
      : cost_(&cost), weights_(&weights), cfg_(cfg) {
    validate(cfg_);
    if (weights.width != cost.width || weights.height != cost.height)
      throw InputError("trws: edge weights and cost volume sizes differ");
    if (!(cost.labels == cfg.labels()))
      throw InputError("trws: cost volume label radius differs from configuration");
    const std::size_t bytes = message_bytes(cost.width, cost.height, cost.labels);
    if (bytes > cfg.memory_cap_bytes)
      throw ResourceError("message store needs " + std::to_string(bytes) + " bytes, cap is " +
                              std::to_string(cfg.memory_cap_bytes),
                          bytes);
    w_ = cost.width;
    h_ = cost.height;
    m_ = cost.labels.size();
    pixels_ = static_cast<std::size_t>(w_) * h_;
    messages_.assign(4 * pixels_ * m_, Real(0));
    offsets_.assign(pixels_, 0.0);
    workspaces_.resize(cfg_.threads);
    lower_bound_ = initial_bound();
  }

  const SolverConfig& config() const { return cfg_; }
  const LabelSpace& labels() const { return cost_->labels; }
  int width() const { return w_; }
  int height() const { return h_; }
  int iteration() const { return iteration_; }
  double lower_bound() const { return lower_bound_; }
  const std::vector<IterationRecord>& history() const { return history_; }
  void set_progress(Progress progress) { progress_ = std::move(progress); }

  // Sum of all constants removed from messages by normalization.
  double normalization_offset() const {
    double sum = 0.0;
    for (double o : offsets_) sum += o;
    return sum;
  }

  bool has_neighbor(int x, int y, Direction d) const {
    const int nx = x + step_x(d), ny = y + step_y(d);
    return nx >= 0 && ny >= 0 && nx < w_ && ny < h_;
  }

  // m_{q->p}, where q is the neighbour of p = (x, y) in direction `from`.
  std::span<const Real> message(int x, int y, Direction from) const {
    return {messages_.data() + slot(from, pixel(x, y)), static_cast<std::size_t>(m_)};
  }

  const std::vector<Real>& messages() const { return messages_; }

  // Evaluates m_{p->q} for q in direction `to` from the current messages
  // without storing it. Returns the minimum subtracted for normalization.
  double compute_message(int x, int y, Direction to, std::span<double> out) const {
    Workspace ws;
    reparameterized_unary(x, y, ws.sum);
    return message_from_sum(x, y, to, ws, out);
  }

  // Recomputes and stores m_{p->q}; returns the normalization increment.
  double update_message(int x, int y, Direction to) {
    if (!has_neighbor(x, y, to)) throw InputError("trws: no neighbour in that direction");
    Workspace& ws = workspaces_[0];
    reparameterized_unary(x, y, ws.sum);
    return store_message(x, y, to, ws);
  }

  void run_iteration() {
    const auto start = std::chrono::steady_clock::now();
    if (cfg_.threads <= 1) {
      Workspace& ws = workspaces_[0];
      for (int y = 0; y < h_; ++y)
        for (int x = 0; x < w_; ++x) process(x, y, true, ws);
      for (int y = h_ - 1; y >= 0; --y)
        for (int x = w_ - 1; x >= 0; --x) process(x, y, false, ws);
    } else {
      sweep_wavefront(true);
      sweep_wavefront(false);
    }
    ++iteration_;
    lower_bound_ = compute_lower_bound();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history_.push_back({iteration_, lower_bound_, secs});
    if (progress_) progress_(history_.back());
  }

  void solve() { solve(cfg_.iterations); }
  void solve(int iterations) {
    for (int i = 0; i < iterations; ++i) run_iteration();
  }

  // Sum of row-chain and column-chain minima of the current
  // reparameterization.
  double compute_lower_bound() const {
    std::vector<double> row_min(h_), col_min(w_);
    const int threads = cfg_.threads;
#pragma omp parallel num_threads(threads)
    {
      ChainScratch sc;
#pragma omp for schedule(static)
      for (int y = 0; y < h_; ++y) row_min[y] = chain_minimum(0, y, Direction::Right, w_, sc);
#pragma omp for schedule(static)
      for (int x = 0; x < w_; ++x) col_min[x] = chain_minimum(x, 0, Direction::Down, h_, sc);
    }
    double total = 0.0;
    for (double v : row_min) total += v;
    for (double v : col_min) total += v;
    return total;
  }

  // Greedy decoding in raster order: l_p minimizes
  //   theta_p(s) + sum_{q<p} theta_pq(s, l_q) + sum_{q>p} m_{q->p}(s)
  // with ties resolved to the smallest label index.
  std::vector<int> decode_labels() const {
    std::vector<int> labeling(pixels_, 0);
    const LabelSpace& ls = cost_->labels;
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        const auto theta = cost_->costs(x, y);
        const bool left = x > 0, up = y > 0;
        const Displacement dl = left ? ls.displacement(labeling[pixel(x - 1, y)]) : Displacement{};
        const Displacement du = up ? ls.displacement(labeling[pixel(x, y - 1)]) : Displacement{};
        const double wl = left ? cfg_.lambda * weights_->right(x - 1, y) : 0.0;
        const double wu = up ? cfg_.lambda * weights_->down(x, y - 1) : 0.0;
        const Real* right = x + 1 < w_ ? messages_.data() + slot(Direction::Right, pixel(x, y)) : nullptr;
        const Real* down = y + 1 < h_ ? messages_.data() + slot(Direction::Down, pixel(x, y)) : nullptr;
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int k = 0; k < m_; ++k) {
          const Displacement s = ls.displacement(k);
          double v = theta[k];
          if (left) v += wl * pairwise_penalty(cfg_.penalty, cfg_.tau, {s.dx - dl.dx, s.dy - dl.dy});
          if (up) v += wu * pairwise_penalty(cfg_.penalty, cfg_.tau, {s.dx - du.dx, s.dy - du.dy});
          if (right) v += right[k];
          if (down) v += down[k];
          if (v < best) {
            best = v;
            arg = k;
          }
        }
        labeling[pixel(x, y)] = arg;
      }
    return labeling;
  }

  FlowField decode() const {
    const auto labeling = decode_labels();
    FlowField flow(w_, h_);
    for (std::size_t i = 0; i < pixels_; ++i) {
      const Displacement d = cost_->labels.displacement(labeling[i]);
      flow.u[i] = static_cast<float>(d.dx);
      flow.v[i] = static_cast<float>(d.dy);
    }
    return flow;
  }

  double energy_of(std::span<const int> labeling) const {
    return energy(labeling, *cost_, *weights_, cfg_);
  }

  // theta~_p(s) = theta_p(s) + sum of all incoming messages.
  void reparameterized_unary(int x, int y, std::vector<double>& out) const {
    out.resize(m_);
    const auto theta = cost_->costs(x, y);
    for (int k = 0; k < m_; ++k) out[k] = theta[k];
    const std::size_t p = pixel(x, y);
    for (Direction d : kDirections) {
      if (!has_neighbor(x, y, d)) continue;
      const Real* msg = messages_.data() + slot(d, p);
      for (int k = 0; k < m_; ++k) out[k] += msg[k];
    }
  }

  // lambda * w_pq for the edge from (x, y) towards `d`.
  double edge_weight(int x, int y, Direction d) const {
    switch (d) {
      case Direction::Right:
        return cfg_.lambda * weights_->right(x, y);
      case Direction::Left:
        return cfg_.lambda * weights_->right(x - 1, y);
      case Direction::Down:
        return cfg_.lambda * weights_->down(x, y);
      case Direction::Up:
        return cfg_.lambda * weights_->down(x, y - 1);
    }
    return 0.0;
  }

 private:
  struct Workspace {
    std::vector<double> sum;
    std::vector<double> phi;
    std::vector<double> out;
    MinConvWorkspace minconv;
  };

  struct ChainScratch {
    std::vector<double> f, g, h, unary;
    MinConvWorkspace minconv;
  };

  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  std::size_t slot(Direction d, std::size_t p) const {
    return (static_cast<std::size_t>(d) * pixels_ + p) * m_;
  }

  double initial_bound() const {
    double bound = 0.0;
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        const auto theta = cost_->costs(x, y);
        double lo = std::numeric_limits<double>::infinity();
        for (float v : theta) lo = std::min(lo, static_cast<double>(v));
        bound += lo;
      }
    const double edge_min = std::min(2.0 * cfg_.penalty(0.0), cfg_.tau);
    double weight_sum = 0.0;
    for (double v : weights_->horizontal) weight_sum += v;
    for (double v : weights_->vertical) weight_sum += v;
    return bound + cfg_.lambda * weight_sum * edge_min;
  }

  // phi_pq(s) = 1/2 * sum(s) - m_{q->p}(s), then the truncated min-convolution
  // and normalization. `ws.sum` must hold the reparameterized unary of p.
  double message_from_sum(int x, int y, Direction to, Workspace& ws, std::span<double> out) const {
    ws.phi.resize(m_);
    const Real* back = messages_.data() + slot(to, pixel(x, y));
    for (int k = 0; k < m_; ++k) ws.phi[k] = 0.5 * ws.sum[k] - static_cast<double>(back[k]);
    minconv2d<double>(ws.phi, cost_->labels, cfg_.penalty, edge_weight(x, y, to), cfg_.tau, out,
                      ws.minconv);
    double lo = out[0];
    for (int k = 1; k < m_; ++k) lo = std::min(lo, out[k]);
    for (int k = 0; k < m_; ++k) out[k] -= lo;
    return lo;
  }

  double store_message(int x, int y, Direction to, Workspace& ws) {
    ws.out.resize(m_);
    const double lo = message_from_sum(x, y, to, ws, ws.out);
    const std::size_t q = pixel(x + step_x(to), y + step_y(to));
    Real* dst = messages_.data() + slot(opposite(to), q);
    for (int k = 0; k < m_; ++k) dst[k] = static_cast<Real>(ws.out[k]);
    offsets_[pixel(x, y)] += lo;
    return lo;
  }

  void process(int x, int y, bool forward, Workspace& ws) {
    const Direction a = forward ? Direction::Right : Direction::Left;
    const Direction b = forward ? Direction::Down : Direction::Up;
    const bool has_a = has_neighbor(x, y, a), has_b = has_neighbor(x, y, b);
    if (!has_a && !has_b) return;
    reparameterized_unary(x, y, ws.sum);
    if (has_a) store_message(x, y, a, ws);
    if (has_b) store_message(x, y, b, ws);
  }

  void sweep_wavefront(bool forward) {
    const int diagonals = w_ + h_ - 1;
#pragma omp parallel num_threads(cfg_.threads)
    {
#ifdef _OPENMP
      Workspace& ws = workspaces_[omp_get_thread_num()];
#else
      Workspace& ws = workspaces_[0];
#endif
      for (int i = 0; i < diagonals; ++i) {
        const int d = forward ? i : diagonals - 1 - i;
        const int x_lo = std::max(0, d - (h_ - 1));
        const int x_hi = std::min(d, w_ - 1);
#pragma omp for schedule(static)
        for (int x = x_lo; x <= x_hi; ++x) process(x, d - x, forward, ws);
      }
    }
  }

  // Minimum of the chain starting at (x0, y0) running `length` pixels in
  // direction `dir`, with unaries theta~_p / 2 and pairwise terms
  // theta_pq(s, t) - m_{q->p}(s) - m_{p->q}(t).
  double chain_minimum(int x0, int y0, Direction dir, int length, ChainScratch& sc) const {
    const Direction back = opposite(dir);
    sc.f.resize(m_);
    sc.g.resize(m_);
    sc.h.resize(m_);
    reparameterized_unary(x0, y0, sc.unary);
    for (int k = 0; k < m_; ++k) sc.f[k] = 0.5 * sc.unary[k];
    int x = x0, y = y0;
    for (int i = 1; i < length; ++i) {
      const int nx = x + step_x(dir), ny = y + step_y(dir);
      const Real* to_p = messages_.data() + slot(dir, pixel(x, y));     // m_{q->p}
      const Real* to_q = messages_.data() + slot(back, pixel(nx, ny));  // m_{p->q}
      for (int k = 0; k < m_; ++k) sc.g[k] = sc.f[k] - static_cast<double>(to_p[k]);
      minconv2d<double>(sc.g, cost_->labels, cfg_.penalty, edge_weight(x, y, dir), cfg_.tau, sc.h,
                        sc.minconv);
      reparameterized_unary(nx, ny, sc.unary);
      for (int k = 0; k < m_; ++k) sc.f[k] = sc.h[k] + 0.5 * sc.unary[k] - static_cast<double>(to_q[k]);
      x = nx;
      y = ny;
    }
    double lo = sc.f[0];
    for (int k = 1; k < m_; ++k) lo = std::min(lo, sc.f[k]);
    return lo;
  }

  const CostVolume* cost_;
  const EdgeWeights* weights_;
  SolverConfig cfg_;
  int w_ = 0, h_ = 0, m_ = 0;
  std::size_t pixels_ = 0;
  std::vector<Real> messages_;
  std::vector<double> offsets_;
  std::vector<Workspace> workspaces_;
  double lower_bound_ = 0.0;
  int iteration_ = 0;
  std::vector<IterationRecord> history_;
  Progress progress_;
};

}  // namespace fullflow
