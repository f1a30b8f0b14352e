#pragma once

// Timing harness: message-update cost against label count for each kernel,
// and TRW-S iteration time against thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fullflow/core.hpp"
#include "fullflow/cost_volume.hpp"
#include "fullflow/minconv.hpp"
#include "fullflow/trws.hpp"

namespace fullflow {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

struct KernelTiming {
  std::string kernel;
  int radius = 0;
  int labels = 0;
  double seconds = 0.0;  // per message update
  int repeats = 0;
};

struct ThreadTiming {
  int threads = 0;
  double seconds = 0.0;  // per iteration
  double speedup = 1.0;
  double max_message_diff = 0.0;  // against the single-threaded run
  bool labels_identical = true;
};

struct BenchOptions {
  std::vector<int> radii{10, 20, 40, 80};
  double min_seconds = 0.2;  // per measurement
  int grid_width = 64;
  int grid_height = 48;
  int grid_radius = 8;
  int iterations = 2;
  std::vector<int> threads;  // empty: {1, max}
  unsigned seed = 1;
};

struct BenchReport {
  std::vector<KernelTiming> kernels;
  std::vector<ThreadTiming> threads;

  // Least-squares slope of log(seconds) against log(labels).
  double exponent(const std::string& kernel) const {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& k : kernels) {
      if (k.kernel != kernel) continue;
      const double x = std::log(static_cast<double>(k.labels)), y = std::log(k.seconds);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
};

inline const std::vector<std::string>& bench_kernels() {
  static const std::vector<std::string> names{"l1", "smawk", "brute"};
  return names;
}

// "l1" is the two-pass distance transform, "smawk" the SMAWK kernel with the
// Charbonnier penalty, "brute" the direct Theta(M^2) evaluation with L1.
inline KernelTiming time_kernel(const std::string& kernel, int radius, double min_seconds, unsigned seed = 1) {
  const LabelSpace labels(radius);
  const std::size_t m = labels.size();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  std::vector<double> phi(m), out(m);
  for (auto& v : phi) v = unit(rng);
  MinConvWorkspace ws;
  const double tau = 10.0, weight = 0.5;
  auto once = [&] {
    if (kernel == "l1") {
      minconv2d<double>(phi, labels, Penalty::l1(), weight, tau, out, ws);
    } else if (kernel == "smawk") {
      minconv2d<double>(phi, labels, Penalty::charbonnier(), weight, tau, out, ws, MinConvKernel::Smawk);
    } else if (kernel == "brute") {
      minconv2d_direct<double>(phi, labels, Penalty::l1(), weight, tau, out);
    } else {
      throw InputError("unknown benchmark kernel '" + kernel + "'");
    }
    phi[0] += out[m / 2] * 1e-12;  // keeps the call observable
  };
  once();  // warm-up
  KernelTiming t{kernel, radius, static_cast<int>(m), 0.0, 0};
  const auto start = std::chrono::steady_clock::now();
  double elapsed = 0.0;
  do {
    once();
    ++t.repeats;
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } while (elapsed < min_seconds);
  t.seconds = elapsed / t.repeats;
  return t;
}

// Random unary costs and weights on a width x height grid.
inline void random_problem(int width, int height, int radius, unsigned seed, CostVolume& cost,
                           EdgeWeights& weights) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  cost.width = width;
  cost.height = height;
  cost.labels = LabelSpace(radius);
  cost.values.resize(cost.pixel_count() * cost.labels.size());
  for (auto& v : cost.values) v = static_cast<float>(unit(rng));
  weights.width = width;
  weights.height = height;
  weights.horizontal.resize(static_cast<std::size_t>(width - 1) * height);
  weights.vertical.resize(static_cast<std::size_t>(width) * (height - 1));
  for (auto& v : weights.horizontal) v = 0.05 + 0.95 * unit(rng);
  for (auto& v : weights.vertical) v = 0.05 + 0.95 * unit(rng);
}

inline std::vector<ThreadTiming> time_threads(const BenchOptions& opt) {
  CostVolume cost;
  EdgeWeights weights;
  random_problem(opt.grid_width, opt.grid_height, opt.grid_radius, opt.seed, cost, weights);
  std::vector<int> counts = opt.threads;
  if (counts.empty()) counts = {1, max_threads()};

  std::vector<ThreadTiming> out;
  std::vector<float> ref_messages;
  std::vector<int> ref_labels;
  double ref_seconds = 0.0;
  for (int threads : counts) {
    SolverConfig cfg;
    cfg.radius = opt.grid_radius;
    cfg.threads = threads;
    TrwsSolver<float> solver(cost, weights, cfg);
    const auto start = std::chrono::steady_clock::now();
    solver.solve(opt.iterations);
    ThreadTiming t;
    t.threads = threads;
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / opt.iterations;
    const auto labels = solver.decode_labels();
    if (ref_messages.empty()) {
      ref_messages = solver.messages();
      ref_labels = labels;
      ref_seconds = t.seconds;
    } else {
      for (std::size_t i = 0; i < ref_messages.size(); ++i)
        t.max_message_diff =
            std::max(t.max_message_diff, std::abs(double(ref_messages[i]) - double(solver.messages()[i])));
      t.labels_identical = labels == ref_labels;
    }
    t.speedup = ref_seconds / t.seconds;
    out.push_back(t);
  }
  return out;
}

inline BenchReport run_bench(const BenchOptions& opt,
                             const std::function<void(const std::string&)>& progress = {}) {
  BenchReport report;
  for (const auto& kernel : bench_kernels())
    for (int radius : opt.radii) {
      if (progress) progress(kernel + " radius " + std::to_string(radius));
      report.kernels.push_back(time_kernel(kernel, radius, opt.min_seconds, opt.seed));
    }
  if (progress) progress("thread scaling");
  report.threads = time_threads(opt);
  return report;
}

inline void write_kernel_csv(const BenchReport& r, std::ostream& os) {
  os << "kernel,radius,labels,seconds_per_update,repeats\n";
  os.precision(9);
  for (const auto& k : r.kernels)
    os << k.kernel << ',' << k.radius << ',' << k.labels << ',' << k.seconds << ',' << k.repeats << '\n';
}

inline void write_thread_csv(const BenchReport& r, std::ostream& os) {
  os << "threads,seconds_per_iteration,speedup,max_message_diff,labels_identical\n";
  os.precision(9);
  for (const auto& t : r.threads)
    os << t.threads << ',' << t.seconds << ',' << t.speedup << ',' << t.max_message_diff << ','
       << (t.labels_identical ? 1 : 0) << '\n';
}

}  // namespace fullflow
