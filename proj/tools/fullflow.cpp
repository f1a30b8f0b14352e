// fullflow: discrete optical flow over the full displacement space.
//
//   fullflow flow  IMAGE1 IMAGE2 [solver flags] [--gt FLO] [--out DIR]
//   fullflow grid  PAIRS [--ranges JSON] [solver flags] [--out DIR]
//   fullflow bench [--radii ...] [--out DIR]
//
// Exit codes: 0 success, 1 usage, 2 input, 3 memory cap, 4 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fullflow/fullflow.hpp"

namespace fs = std::filesystem;
using namespace fullflow;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kResource = 3, kInternal = 4 };

struct SolverFlags {
  double lambda = 1.0;
  std::string tau = "inf";
  double beta = 0.1;
  double zeta = 1.0;
  double delta = 2.0;
  int radius = 8;
  int iterations = 3;
  std::string penalty = "l1";
  double charbonnier_eps = 5.0;
  int patch_radius = 1;
  int scale = 3;
  std::string data_term = "ncc";
  int threads = 1;
  double memory_cap_gb = 4.0;
};

int default_threads() {
  if (const char* env = std::getenv("FULLFLOW_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring FULLFLOW_THREADS='" << env << "'\n";
  }
  return 1;
}

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--lambda", f.lambda, "regularization weight")->capture_default_str();
  app->add_option("--tau", f.tau, "truncation of the pairwise penalty, a number or inf")->capture_default_str();
  app->add_option("--beta", f.beta, "edge weight scale in exp(-|dI|/beta)")->capture_default_str();
  app->add_option("--zeta", f.zeta, "unary cost for displacements leaving the image")->capture_default_str();
  app->add_option("--delta", f.delta, "forward-backward consistency threshold (squared pixels)")
      ->capture_default_str();
  app->add_option("--radius", f.radius, "label radius at solver resolution")->capture_default_str();
  app->add_option("--iterations", f.iterations, "TRW-S iterations")->capture_default_str();
  app->add_option("--penalty", f.penalty, "l1, l2 or charbonnier")
      ->check(CLI::IsMember({"l1", "l2", "charbonnier"}))
      ->capture_default_str();
  app->add_option("--charbonnier-eps", f.charbonnier_eps, "Charbonnier epsilon")->capture_default_str();
  app->add_option("--patch-radius", f.patch_radius, "NCC patch radius")->capture_default_str();
  app->add_option("--scale", f.scale, "downsampling factor before solving")->capture_default_str();
  app->add_option("--data-term", f.data_term, "ncc or hs")->check(CLI::IsMember({"ncc", "hs"}))->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads (default: FULLFLOW_THREADS or 1)")->capture_default_str();
  app->add_option("--memory-cap-gb", f.memory_cap_gb, "memory cap for the large buffers in GiB")
      ->capture_default_str();
}

double parse_tau(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF") return kUntruncated;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw CLI::ValidationError("--tau", "expected a number or 'inf', got '" + s + "'");
  return v;
}

// Usage-level validation happens here so that bad flags exit with code 1.
SolverConfig resolve(const SolverFlags& f) {
  SolverConfig cfg;
  cfg.lambda = f.lambda;
  cfg.tau = parse_tau(f.tau);
  cfg.beta = f.beta;
  cfg.zeta = f.zeta;
  cfg.delta = f.delta;
  cfg.radius = f.radius;
  cfg.iterations = f.iterations;
  const PenaltyKind kind = parse_penalty_kind(f.penalty);
  cfg.penalty = kind == PenaltyKind::Charbonnier ? Penalty{kind, f.charbonnier_eps} : Penalty{kind, 0.0};
  cfg.patch_radius = f.patch_radius;
  cfg.scale = f.scale;
  cfg.data_term = parse_data_term(f.data_term);
  cfg.threads = f.threads;
  if (!(f.memory_cap_gb > 0.0)) throw CLI::ValidationError("--memory-cap-gb", "must be positive");
  cfg.memory_cap_bytes = static_cast<std::size_t>(f.memory_cap_gb * double(std::size_t{1} << 30));
  try {
    validate(cfg);
  } catch (const InputError& e) {
    throw CLI::ValidationError(e.what());
  }
  return cfg;
}

std::string mib(std::size_t bytes) {
  std::ostringstream os;
  os.precision(1);
  os << std::fixed << static_cast<double>(bytes) / (1 << 20) << " MiB";
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
  os << text;
}

int cmd_flow(const std::string& image1, const std::string& image2, const std::string& gt_path,
             const std::string& out_dir, const SolverConfig& cfg) {
  const Image I1 = read_image(image1);
  const Image I2 = read_image(image2);
  FlowField gt;
  if (!gt_path.empty()) gt = read_flo(gt_path);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  std::cout << "images " << I1.width() << "x" << I1.height() << ", labels " << cfg.labels().size() << " (radius "
            << cfg.radius << "), scale " << cfg.scale << ", threads " << cfg.threads << "\n";
  const FlowRun run = run_flow(I1, I2, cfg, [&](const MemoryEstimate& m) {
    std::cout << "memory estimate: cost volume " << m.cost_volume << " bytes (" << mib(m.cost_volume)
              << "), messages " << m.messages << " bytes (" << mib(m.messages) << "), peak " << mib(m.peak())
              << "\n"
              << std::flush;
  });
  for (const auto* dir : {&run.forward, &run.backward}) {
    std::cout << (dir == &run.forward ? "forward " : "backward");
    for (const auto& r : dir->log) std::cout << "  it" << r.iteration << " bound " << r.lower_bound;
    std::cout << "  energy " << dir->energy << "\n";
  }
  std::cout << "consistent " << run.consistent.valid_count() << "/" << run.consistent.size() << " pixels\n";

  write_flo(run.flow, (out / "out.flo").string());
  write_image(flow_to_color(run.flow), (out / "flow.png").string());
  write_matches(run.consistent, cfg.scale, (out / "matches.txt").string());

  if (!gt_path.empty()) {
    const FlowMetrics m = compute_metrics(run.flow, gt);
    const FlowField kept = upscale_flow(run.consistent, cfg.scale, I1.width(), I1.height());
    const FlowMetrics mc = compute_metrics(kept, gt, {}, true);
    write_image(error_map(m, gt.width, gt.height), (out / "error.png").string());
    std::ostringstream csv;
    csv.precision(9);
    csv << "epe_all,outlier_rate,evaluated,epe_consistent,consistent_evaluated\n"
        << m.epe_all << ',' << m.outlier_rate << ',' << m.evaluated << ',' << mc.epe_all << ',' << mc.evaluated
        << '\n';
    write_text(out / "metrics.csv", csv.str());
    std::cout << "EPE " << m.epe_all << "  outliers " << 100.0 * m.outlier_rate << "%  EPE(consistent) "
              << mc.epe_all << "\n";
  }
  auto manifest = run_manifest(run, image1, image2, out_dir, gt_path);
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << out.string() << "/ in " << run.stage_seconds("total") << " s\n";
  return kOk;
}

int cmd_grid(const std::string& pairs_path, const std::string& ranges_path, const std::string& out_dir,
             const SolverConfig& base) {
  const auto specs = read_pair_manifest(pairs_path);
  const GridRanges ranges = ranges_path.empty() ? GridRanges{} : load_grid_ranges(ranges_path);
  const auto pairs = load_pairs(specs);
  fs::create_directories(out_dir);
  const GridResult result = run_grid(pairs, base, ranges, [](const std::string& msg) {
    std::cout << msg << "\n" << std::flush;
  });
  std::ofstream table(fs::path(out_dir) / "grid_table.csv"), series(fs::path(out_dir) / "grid_series.csv");
  if (!table || !series) throw InputError("cannot write results to '" + out_dir + "'");
  write_grid_table(result, table);
  write_grid_series(result, series);
  write_grid_table(result, std::cout);
  return kOk;
}

int cmd_bench(const BenchOptions& opt, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const BenchReport report = run_bench(opt, [](const std::string& msg) { std::cout << msg << "\n" << std::flush; });
  std::ofstream kernels(fs::path(out_dir) / "bench_kernels.csv"), threads(fs::path(out_dir) / "bench_threads.csv");
  if (!kernels || !threads) throw InputError("cannot write results to '" + out_dir + "'");
  write_kernel_csv(report, kernels);
  write_thread_csv(report, threads);
  write_kernel_csv(report, std::cout);
  for (const auto& k : bench_kernels()) std::cout << "exponent " << k << " " << report.exponent(k) << "\n";
  write_thread_csv(report, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete optical flow over the full displacement space"};
  app.require_subcommand(1);

  SolverFlags flow_flags, grid_flags;
  flow_flags.threads = grid_flags.threads = default_threads();

  std::string image1, image2, gt, flow_out = "out";
  auto* flow = app.add_subcommand("flow", "estimate flow between two images");
  flow->add_option("image1", image1, "first frame (PPM or PNG)")->required();
  flow->add_option("image2", image2, "second frame (PPM or PNG)")->required();
  flow->add_option("--gt", gt, "ground truth .flo for metrics and the error map");
  flow->add_option("--out", flow_out, "output directory")->capture_default_str();
  add_solver_flags(flow, flow_flags);

  std::string pairs, ranges, grid_out = "grid";
  auto* grid = app.add_subcommand("grid", "data term x penalty x truncation experiment");
  grid->add_option("pairs", pairs, "manifest of 'image1 image2 gt.flo' lines")->required();
  grid->add_option("--ranges", ranges, "JSON file with parameter ranges");
  grid->add_option("--out", grid_out, "output directory")->capture_default_str();
  add_solver_flags(grid, grid_flags);

  BenchOptions bench_opt;
  std::string bench_out = "bench";
  auto* bench = app.add_subcommand("bench", "kernel and thread scaling measurements");
  bench->add_option("--radii", bench_opt.radii, "label radii for the kernel timings")->capture_default_str();
  bench->add_option("--min-seconds", bench_opt.min_seconds, "minimum time per measurement")->capture_default_str();
  bench->add_option("--threads", bench_opt.threads, "thread counts to compare (default: 1 and max)");
  bench->add_option("--grid-radius", bench_opt.grid_radius, "label radius of the threading instance")
      ->capture_default_str();
  bench->add_option("--out", bench_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (*flow) return cmd_flow(image1, image2, gt, flow_out, resolve(flow_flags));
    if (*grid) return cmd_grid(pairs, ranges, grid_out, resolve(grid_flags));
    if (*bench) return cmd_bench(bench_opt, bench_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kResource;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kResource;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
