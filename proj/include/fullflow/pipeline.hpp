#pragma once

// End-to-end flow estimation: downsample, forward and backward MRF solves,
// consistency check, interpolation and upscaling. Also the run manifest.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fullflow/core.hpp"
#include "fullflow/cost_volume.hpp"
#include "fullflow/postprocess.hpp"
#include "fullflow/trws.hpp"

namespace fullflow {

struct MemoryEstimate {
  std::size_t cost_volume = 0;
  std::size_t messages = 0;
  // Directions are solved one after the other, so only one cost volume and
  // one message store are alive at a time.
  std::size_t peak() const { return cost_volume + messages; }
};

inline MemoryEstimate estimate_memory(int width, int height, const SolverConfig& cfg) {
  const LabelSpace labels = cfg.labels();
  return {cost_volume_bytes(width, height, labels), TrwsSolver<float>::message_bytes(width, height, labels)};
}

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

// One direction of the MRF at solver resolution.
struct DirectionResult {
  FlowField flow;
  std::vector<IterationRecord> log;
  double energy = 0.0;
};

struct FlowRun {
  SolverConfig cfg;
  int full_width = 0, full_height = 0;
  int solve_width = 0, solve_height = 0;
  MemoryEstimate memory;
  DirectionResult forward;
  DirectionResult backward;
  FlowField consistent;  // forward flow after the consistency check
  FlowField filled;      // consistent flow with gaps interpolated
  FlowField flow;        // full resolution result
  std::vector<StageTime> stages;

  double stage_seconds(const std::string& name) const {
    for (const auto& s : stages)
      if (s.stage == name) return s.seconds;
    return 0.0;
  }
};

namespace detail {

// Re-raises library errors with the failing stage prepended, keeping the type.
template <class Fn>
auto in_stage(const std::string& stage, std::vector<StageTime>& times, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    times.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto r = fn();
      finish();
      return r;
    }
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), stage + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(stage + ": " + e.what());
  } catch (const ResourceError& e) {
    throw ResourceError(stage + ": " + e.what(), e.required_bytes());
  } catch (const InvariantError& e) {
    throw InvariantError(stage + ": " + e.what());
  }
}

}  // namespace detail

// Builds the cost volume for (I1, I2), runs TRW-S and decodes.
inline DirectionResult solve_direction(const Image& I1, const Image& I2, const SolverConfig& cfg,
                                       const EdgeWeights& weights) {
  const CostVolume cost = build_cost_volume(I1, I2, cfg);
  TrwsSolver<float> solver(cost, weights, cfg);
  solver.solve();
  DirectionResult r;
  const auto labeling = solver.decode_labels();
  r.energy = solver.energy_of(labeling);
  r.flow = solver.decode();
  r.log = solver.history();
  return r;
}

inline void check_memory(const MemoryEstimate& mem, const SolverConfig& cfg) {
  if (mem.peak() > cfg.memory_cap_bytes)
    throw ResourceError("cost volume (" + std::to_string(mem.cost_volume) + " bytes) plus messages (" +
                            std::to_string(mem.messages) + " bytes) exceed the cap of " +
                            std::to_string(cfg.memory_cap_bytes) + " bytes",
                        mem.peak());
}

// `on_estimate` is called with the buffer sizes before anything large is
// allocated.
inline FlowRun run_flow(const Image& I1, const Image& I2, const SolverConfig& cfg,
                        const std::function<void(const MemoryEstimate&)>& on_estimate = {}) {
  validate(cfg);
  detail::check_same_size(I1, I2);
  FlowRun run;
  run.cfg = cfg;
  run.full_width = I1.width();
  run.full_height = I1.height();
  auto& t = run.stages;
  const auto total_start = std::chrono::steady_clock::now();

  Image a, b;
  detail::in_stage("downsample", t, [&] {
    a = downsample(I1, cfg.scale);
    b = downsample(I2, cfg.scale);
  });
  run.solve_width = a.width();
  run.solve_height = a.height();
  run.memory = estimate_memory(a.width(), a.height(), cfg);
  if (on_estimate) on_estimate(run.memory);
  detail::in_stage("memory", t, [&] { check_memory(run.memory, cfg); });

  const EdgeWeights wf = detail::in_stage("edge weights", t, [&] { return build_edge_weights(a, cfg.beta); });
  const EdgeWeights wb = build_edge_weights(b, cfg.beta);
  run.forward = detail::in_stage("forward solve", t, [&] { return solve_direction(a, b, cfg, wf); });
  run.backward = detail::in_stage("backward solve", t, [&] { return solve_direction(b, a, cfg, wb); });
  run.consistent = detail::in_stage("consistency check", t,
                                    [&] { return consistency_check(run.forward.flow, run.backward.flow, cfg.delta); });
  run.filled = detail::in_stage("interpolation", t, [&] { return interpolate_fill(run.consistent, 16, cfg.threads); });
  run.flow = detail::in_stage("upscale", t,
                              [&] { return upscale_flow(run.filled, cfg.scale, I1.width(), I1.height()); });
  t.push_back({"total", std::chrono::duration<double>(std::chrono::steady_clock::now() - total_start).count()});
  return run;
}

//////////////////////////////////////////////////////////////////////
// Manifest

inline nlohmann::json tau_to_json(double tau) {
  if (std::isinf(tau)) return "inf";
  return tau;
}

inline nlohmann::json config_to_json(const SolverConfig& cfg) {
  return {
      {"lambda", cfg.lambda},
      {"tau", tau_to_json(cfg.tau)},
      {"beta", cfg.beta},
      {"zeta", cfg.zeta},
      {"delta", cfg.delta},
      {"radius", cfg.radius},
      {"iterations", cfg.iterations},
      {"penalty", std::string(to_string(cfg.penalty.kind))},
      {"charbonnier_eps", cfg.penalty.eps},
      {"patch_radius", cfg.patch_radius},
      {"scale", cfg.scale},
      {"data_term", std::string(to_string(cfg.data_term))},
      {"threads", cfg.threads},
      {"memory_cap_bytes", cfg.memory_cap_bytes},
  };
}

// Command line that reproduces the run.
inline std::string rerun_command(const SolverConfig& cfg, const std::string& image1, const std::string& image2,
                                 const std::string& out_dir, const std::string& gt = {}) {
  std::ostringstream os;
  os.precision(17);
  os << "fullflow flow " << image1 << ' ' << image2 << " --lambda " << cfg.lambda << " --tau ";
  if (std::isinf(cfg.tau))
    os << "inf";
  else
    os << cfg.tau;
  os << " --beta " << cfg.beta << " --zeta " << cfg.zeta << " --delta " << cfg.delta << " --radius "
     << cfg.radius << " --iterations " << cfg.iterations << " --penalty " << to_string(cfg.penalty.kind)
     << " --patch-radius " << cfg.patch_radius << " --scale " << cfg.scale << " --data-term " << to_string(cfg.data_term) << " --threads " << cfg.threads
     << " --memory-cap-gb " << static_cast<double>(cfg.memory_cap_bytes) / double(1ull << 30);
  if (cfg.penalty.kind == PenaltyKind::Charbonnier) os << " --charbonnier-eps " << cfg.penalty.eps;
  if (!gt.empty()) os << " --gt " << gt;
  os << " --out " << out_dir;
  return os.str();
}

inline nlohmann::json iteration_log_to_json(const std::vector<IterationRecord>& log) {
  auto arr = nlohmann::json::array();
  for (const auto& r : log) arr.push_back({{"iteration", r.iteration}, {"lower_bound", r.lower_bound}, {"seconds", r.seconds}});
  return arr;
}

inline nlohmann::json run_manifest(const FlowRun& run, const std::string& image1, const std::string& image2,
                                   const std::string& out_dir, const std::string& gt = {}) {
  nlohmann::json j;
  j["config"] = config_to_json(run.cfg);
  j["inputs"] = {{"image1", image1}, {"image2", image2}};
  if (!gt.empty()) j["inputs"]["ground_truth"] = gt;
  j["output_dir"] = out_dir;
  j["command"] = rerun_command(run.cfg, image1, image2, out_dir, gt);
  j["resolution"] = {{"full", {run.full_width, run.full_height}}, {"solver", {run.solve_width, run.solve_height}}};
  j["memory_bytes"] = {{"cost_volume", run.memory.cost_volume},
                       {"messages", run.memory.messages},
                       {"peak", run.memory.peak()}};
  auto stages = nlohmann::json::object();
  for (const auto& s : run.stages) stages[s.stage] = s.seconds;
  j["stage_seconds"] = stages;
  j["iterations"] = {{"forward", iteration_log_to_json(run.forward.log)},
                     {"backward", iteration_log_to_json(run.backward.log)}};
  j["energy"] = {{"forward", run.forward.energy}, {"backward", run.backward.energy}};
  j["valid_after_check"] = run.consistent.valid_count();
  j["pixels"] = run.consistent.size();
  return j;
}

}  // namespace fullflow
