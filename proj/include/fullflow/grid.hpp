#pragma once

// Controlled experiment over data term x penalty x truncation, with a
// parameter grid search per condition.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fullflow/core.hpp"
#include "fullflow/cost_volume.hpp"
#include "fullflow/eval.hpp"
#include "fullflow/flow_io.hpp"
#include "fullflow/image_io.hpp"
#include "fullflow/postprocess.hpp"
#include "fullflow/trws.hpp"

namespace fullflow {

struct GridRanges {
  std::vector<double> lambda{0.25, 0.5, 1, 2, 4};
  std::vector<double> tau{2, 5, 10, kUntruncated};
  std::vector<double> beta{0.05, 0.1, 0.2};
  std::vector<double> zeta{0.5, 1};
  std::vector<double> delta{1, 2, 4};

  // Finite tau values, used by the truncated conditions.
  std::vector<double> finite_tau() const {
    std::vector<double> out;
    for (double t : tau)
      if (std::isfinite(t)) out.push_back(t);
    return out;
  }
};

namespace detail {

inline std::vector<double> json_numbers(const nlohmann::json& arr, const std::string& key) {
  if (!arr.is_array() || arr.empty()) throw InputError("grid ranges: '" + key + "' must be a non-empty array");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_string() && v.get<std::string>() == "inf") {
      out.push_back(kUntruncated);
    } else {
      throw InputError("grid ranges: bad value in '" + key + "'");
    }
  }
  return out;
}

}  // namespace detail

// JSON object with any of the keys lambda, tau, beta, zeta, delta; missing
// keys keep their defaults. tau accepts the string "inf".
inline GridRanges parse_grid_ranges(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid ranges: ") + e.what());
  }
  if (!j.is_object()) throw InputError("grid ranges: expected a JSON object");
  GridRanges r;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto values = detail::json_numbers(it.value(), it.key());
    if (it.key() == "lambda") r.lambda = values;
    else if (it.key() == "tau") r.tau = values;
    else if (it.key() == "beta") r.beta = values;
    else if (it.key() == "zeta") r.zeta = values;
    else if (it.key() == "delta") r.delta = values;
    else throw InputError("grid ranges: unknown key '" + it.key() + "'");
  }
  if (r.finite_tau().empty()) throw InputError("grid ranges: tau needs at least one finite value");
  return r;
}

inline GridRanges load_grid_ranges(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_grid_ranges(ss.str());
}

struct PairSpec {
  std::string image1, image2, ground_truth;
};

// One "image1 image2 gt.flo" triple per line; '#' starts a comment. Relative
// paths are resolved against the manifest's directory.
inline std::vector<PairSpec> read_pair_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open '" + path + "'");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).string();
  };
  std::vector<PairSpec> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 3)
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 'image1 image2 ground_truth.flo'");
    pairs.push_back({resolve(fields[0]), resolve(fields[1]), resolve(fields[2])});
  }
  if (pairs.empty()) throw InputError(path + ": manifest lists no image pairs");
  return pairs;
}

struct GridPair {
  std::string name;
  Image image1, image2;
  FlowField ground_truth;
};

inline std::vector<GridPair> load_pairs(const std::vector<PairSpec>& specs) {
  std::vector<GridPair> out;
  for (const auto& s : specs) {
    GridPair p{std::filesystem::path(s.image1).filename().string(), read_image(s.image1), read_image(s.image2),
               read_flo(s.ground_truth)};
    detail::check_same_size(p.image1, p.image2);
    if (p.ground_truth.width != p.image1.width() || p.ground_truth.height != p.image1.height())
      throw InputError(s.ground_truth + ": ground truth size does not match the images");
    out.push_back(std::move(p));
  }
  return out;
}

struct GridCondition {
  DataTerm data_term;
  PenaltyKind penalty;
  bool truncated;

  std::string name() const {
    return std::string(to_string(data_term)) + "+" + std::string(to_string(penalty)) +
           (truncated ? "+trunc" : "+untrunc");
  }
};

// The twelve conditions: {ncc, hs} x {l1, l2, charbonnier} x {truncated, not}.
inline std::vector<GridCondition> grid_conditions() {
  std::vector<GridCondition> out;
  for (DataTerm d : {DataTerm::TruncatedNCC, DataTerm::PixelwiseHS})
    for (PenaltyKind p : {PenaltyKind::L1, PenaltyKind::SquaredL2, PenaltyKind::Charbonnier})
      for (bool t : {true, false}) out.push_back({d, p, t});
  return out;
}

struct GridParams {
  double lambda, tau, beta, zeta, delta;
  auto key() const { return std::array<double, 5>{lambda, tau, beta, zeta, delta}; }
};

struct GridCell {
  GridCondition condition;
  GridParams best{};
  double mean_epe = std::numeric_limits<double>::infinity();
  std::vector<double> pair_epe;  // per pair at the best parameters, in manifest order
  std::size_t candidates = 0;
};

struct GridResult {
  std::vector<std::string> pair_names;
  std::vector<GridCell> cells;
};

namespace detail {

// Consistency check, fill and upscale for one delta; falls back to the raw
// forward flow when the check leaves nothing to interpolate from.
inline FlowField finish_flow(const FlowField& fwd, const FlowField& bwd, double delta, int scale, int w, int h,
                             int threads) {
  FlowField checked = consistency_check(fwd, bwd, delta);
  if (checked.valid_count() == 0) checked = fwd;
  return upscale_flow(interpolate_fill(checked, 16, threads), scale, w, h);
}

}  // namespace detail

// Every condition is solved for every parameter combination on every pair;
// the reported cell is the combination with the lowest mean EPE.
inline GridResult run_grid(const std::vector<GridPair>& pairs, const SolverConfig& base, const GridRanges& ranges,
                           const std::function<void(const std::string&)>& progress = {}) {
  if (pairs.empty()) throw InputError("grid: no image pairs");
  validate(base);
  const auto conditions = grid_conditions();
  // per condition: parameter key -> EPE per pair
  std::vector<std::map<std::array<double, 5>, std::vector<double>>> table(conditions.size());
  const std::size_t npairs = pairs.size();
  const double eps = base.penalty.kind == PenaltyKind::Charbonnier ? base.penalty.eps : Penalty::charbonnier().eps;

  for (std::size_t pi = 0; pi < npairs; ++pi) {
    const GridPair& pair = pairs[pi];
    if (progress) progress("pair " + std::to_string(pi + 1) + "/" + std::to_string(npairs) + " " + pair.name);
    const Image a = downsample(pair.image1, base.scale);
    const Image b = downsample(pair.image2, base.scale);
    for (DataTerm data : {DataTerm::TruncatedNCC, DataTerm::PixelwiseHS}) {
      for (double zeta : ranges.zeta) {
        SolverConfig vcfg = base;
        vcfg.data_term = data;
        vcfg.zeta = zeta;
        const CostVolume cf = build_cost_volume(a, b, vcfg);
        const CostVolume cb = build_cost_volume(b, a, vcfg);
        for (double beta : ranges.beta) {
          const EdgeWeights wf = build_edge_weights(a, beta);
          const EdgeWeights wb = build_edge_weights(b, beta);
          for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
            const GridCondition& cond = conditions[ci];
            if (cond.data_term != data) continue;
            const std::vector<double> taus = cond.truncated ? ranges.finite_tau() : std::vector<double>{kUntruncated};
            for (double tau : taus)
              for (double lambda : ranges.lambda) {
                SolverConfig cfg = vcfg;
                cfg.beta = beta;
                cfg.tau = tau;
                cfg.lambda = lambda;
                cfg.penalty = cond.penalty == PenaltyKind::Charbonnier ? Penalty::charbonnier(eps)
                                                                       : Penalty{cond.penalty, 0.0};
                TrwsSolver<float> sf(cf, wf, cfg), sb(cb, wb, cfg);
                sf.solve();
                sb.solve();
                const FlowField ff = sf.decode(), fb = sb.decode();
                for (double delta : ranges.delta) {
                  const FlowField full = detail::finish_flow(ff, fb, delta, base.scale, pair.image1.width(),
                                                             pair.image1.height(), base.threads);
                  const double epe = compute_metrics(full, pair.ground_truth).epe_all;
                  auto& row = table[ci][GridParams{lambda, tau, beta, zeta, delta}.key()];
                  row.resize(npairs, 0.0);
                  row[pi] = epe;
                }
              }
          }
        }
      }
    }
  }

  GridResult result;
  for (const auto& p : pairs) result.pair_names.push_back(p.name);
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    GridCell cell;
    cell.condition = conditions[ci];
    cell.candidates = table[ci].size();
    for (const auto& [key, epes] : table[ci]) {
      double mean = 0.0;
      for (double e : epes) mean += e;
      mean /= static_cast<double>(npairs);
      if (mean < cell.mean_epe) {
        cell.mean_epe = mean;
        cell.best = {key[0], key[1], key[2], key[3], key[4]};
        cell.pair_epe = epes;
      }
    }
    result.cells.push_back(std::move(cell));
  }
  return result;
}

inline std::string format_tau(double tau) {
  if (std::isinf(tau)) return "inf";
  std::ostringstream os;
  os << tau;
  return os.str();
}

// Mean EPE per condition with the selected parameters.
inline void write_grid_table(const GridResult& r, std::ostream& os) {
  os << "condition,data_term,penalty,truncated,mean_epe,lambda,tau,beta,zeta,delta\n";
  os.precision(9);
  for (const auto& c : r.cells) {
    os << c.condition.name() << ',' << to_string(c.condition.data_term) << ',' << to_string(c.condition.penalty)
       << ',' << (c.condition.truncated ? 1 : 0) << ',' << c.mean_epe << ',' << c.best.lambda << ','
       << format_tau(c.best.tau) << ',' << c.best.beta << ',' << c.best.zeta << ',' << c.best.delta << '\n';
  }
}

// Per-image EPE of each condition in ascending order.
inline void write_grid_series(const GridResult& r, std::ostream& os) {
  os << "condition,rank,pair,epe\n";
  os.precision(9);
  for (const auto& c : r.cells) {
    std::vector<std::size_t> order(c.pair_epe.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return c.pair_epe[a] < c.pair_epe[b]; });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
      os << c.condition.name() << ',' << rank << ',' << r.pair_names[order[rank]] << ',' << c.pair_epe[order[rank]]
         << '\n';
  }
}

}  // namespace fullflow
