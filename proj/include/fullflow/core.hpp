#pragma once

// Shared domain types: images, the 2D label space, penalty functions,
// solver configuration and flow fields.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fullflow {

//////////////////////////////////////////////////////////////////////
// Errors

// Every failure raised by the library derives from Error. The CLI maps the
// concrete type onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or unreadable inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents.
class FormatError : public InputError {
 public:
  enum class Kind { BadMagic, Truncated, BadDimensions, Unsupported, Corrupt };

  FormatError(Kind kind, const std::string& what) : InputError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A buffer would exceed the configured memory budget.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, std::size_t required_bytes)
      : Error(what), required_bytes_(required_bytes) {}
  std::size_t required_bytes() const { return required_bytes_; }

 private:
  std::size_t required_bytes_;
};

// An internal consistency check failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

//////////////////////////////////////////////////////////////////////
// Image

// Dense RGB raster with interleaved channels normalized to [0,1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InputError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                       std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  // Clamp-to-edge access.
  float clamped(int x, int y, int c) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return at(x, y, c);
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Block-mean downsampling. Partial blocks at the right and bottom borders are
// averaged over the pixels they actually contain.
inline Image downsample(const Image& img, int scale) {
  if (scale <= 0) throw InputError("downsample: scale must be >= 1, got " + std::to_string(scale));
  if (scale == 1) return img;
  const int w = (img.width() + scale - 1) / scale;
  const int h = (img.height() + scale - 1) / scale;
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = x * scale, y0 = y * scale;
      const int x1 = std::min(x0 + scale, img.width()), y1 = std::min(y0 + scale, img.height());
      const double count = static_cast<double>(x1 - x0) * (y1 - y0);
      for (int c = 0; c < Image::kChannels; ++c) {
        double sum = 0.0;
        for (int yy = y0; yy < y1; ++yy)
          for (int xx = x0; xx < x1; ++xx) sum += img.at(xx, yy, c);
        out.at(x, y, c) = static_cast<float>(sum / count);
      }
    }
  }
  return out;
}

//////////////////////////////////////////////////////////////////////
// Label space

struct Displacement {
  int dx = 0;
  int dy = 0;
  bool operator==(const Displacement&) const = default;
};

// The displacement set [-radius, radius]^2, indexed row-major with dx
// varying fastest: index = (dy + radius) * side + (dx + radius).
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(int radius) : radius_(radius) {
    if (radius < 0) throw InputError("label radius must be non-negative");
  }

  int radius() const { return radius_; }
  int side() const { return 2 * radius_ + 1; }
  int size() const { return side() * side(); }

  int index(Displacement d) const { return (d.dy + radius_) * side() + (d.dx + radius_); }
  int index(int dx, int dy) const { return index(Displacement{dx, dy}); }
  Displacement displacement(int index) const {
    return {index % side() - radius_, index / side() - radius_};
  }
  bool contains(Displacement d) const {
    return std::abs(d.dx) <= radius_ && std::abs(d.dy) <= radius_;
  }

  bool operator==(const LabelSpace&) const = default;

 private:
  int radius_ = 0;
};

// Smallest radius covering a displacement magnitude observed at full
// resolution once images are downsampled by `scale`.
inline int radius_for_displacement(double max_displacement, int scale) {
  return static_cast<int>(std::ceil(max_displacement / scale));
}

//////////////////////////////////////////////////////////////////////
// Penalty functions

enum class PenaltyKind { L1, SquaredL2, Charbonnier };

// Convex, even per-component penalty rho. Charbonnier is sqrt(x^2 + eps^2),
// not shifted, so rho(0) = eps.
struct Penalty {
  PenaltyKind kind = PenaltyKind::L1;
  double eps = 5.0;

  static Penalty l1() { return {PenaltyKind::L1, 0.0}; }
  static Penalty squared_l2() { return {PenaltyKind::SquaredL2, 0.0}; }
  static Penalty charbonnier(double eps = 5.0) {
    if (!(eps > 0.0)) throw InputError("charbonnier epsilon must be positive");
    return {PenaltyKind::Charbonnier, eps};
  }

  double operator()(double x) const {
    switch (kind) {
      case PenaltyKind::L1:
        return std::abs(x);
      case PenaltyKind::SquaredL2:
        return x * x;
      case PenaltyKind::Charbonnier:
        return std::sqrt(x * x + eps * eps);
    }
    return 0.0;
  }

  bool operator==(const Penalty&) const = default;
};

inline std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::L1:
      return "l1";
    case PenaltyKind::SquaredL2:
      return "l2";
    case PenaltyKind::Charbonnier:
      return "charbonnier";
  }
  return "?";
}

inline PenaltyKind parse_penalty_kind(std::string_view s) {
  if (s == "l1") return PenaltyKind::L1;
  if (s == "l2") return PenaltyKind::SquaredL2;
  if (s == "charbonnier") return PenaltyKind::Charbonnier;
  throw InputError("unknown penalty '" + std::string(s) + "' (expected l1, l2 or charbonnier)");
}

// Discrete convexity over the integers in [-range, range].
template <class Rho>
bool is_discretely_convex(const Rho& rho, int range, double tol = 1e-12) {
  for (int x = -range + 1; x < range; ++x) {
    const double second = rho(x + 1) - 2.0 * rho(x) + rho(x - 1);
    if (second < -tol * (1.0 + std::abs(rho(x)))) return false;
  }
  return true;
}

// Regularizer rho_S(f) = min(rho(f1) + rho(f2), tau).
inline double pairwise_penalty(const Penalty& rho, double tau, Displacement d) {
  return std::min(rho(d.dx) + rho(d.dy), tau);
}

//////////////////////////////////////////////////////////////////////
// Solver configuration

enum class DataTerm { TruncatedNCC, PixelwiseHS };

inline std::string_view to_string(DataTerm term) {
  return term == DataTerm::TruncatedNCC ? "ncc" : "hs";
}

inline DataTerm parse_data_term(std::string_view s) {
  if (s == "ncc") return DataTerm::TruncatedNCC;
  if (s == "hs") return DataTerm::PixelwiseHS;
  throw InputError("unknown data term '" + std::string(s) + "' (expected ncc or hs)");
}

inline constexpr double kUntruncated = std::numeric_limits<double>::infinity();

struct SolverConfig {
  double lambda = 1.0;
  double tau = kUntruncated;
  double beta = 0.1;
  double zeta = 1.0;
  double delta = 2.0;
  int radius = 8;
  int iterations = 3;
  Penalty penalty = Penalty::l1();
  int patch_radius = 1;
  int scale = 3;
  DataTerm data_term = DataTerm::TruncatedNCC;
  int threads = 1;
  std::size_t memory_cap_bytes = std::size_t{4} << 30;

  LabelSpace labels() const { return LabelSpace(radius); }
  bool truncated() const { return std::isfinite(tau); }
};

inline void validate(const SolverConfig& cfg) {
  auto fail = [](const std::string& msg) { throw InputError("invalid configuration: " + msg); };
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0) fail("lambda must be finite and >= 0");
  if (!(cfg.tau > 0.0)) fail("tau must be positive or inf");
  if (!std::isfinite(cfg.beta) || cfg.beta <= 0.0) fail("beta must be finite and > 0");
  if (!std::isfinite(cfg.zeta) || cfg.zeta < 0.0) fail("zeta must be finite and >= 0");
  if (!std::isfinite(cfg.delta) || cfg.delta <= 0.0) fail("delta must be finite and > 0");
  if (cfg.radius < 0) fail("radius must be >= 0");
  if (cfg.iterations < 1) fail("iterations must be >= 1");
  if (cfg.patch_radius < 1) fail("patch radius must be >= 1");
  if (cfg.scale < 1) fail("scale must be >= 1");
  if (cfg.threads < 1) fail("threads must be >= 1");
  if (cfg.penalty.kind == PenaltyKind::Charbonnier &&
      (!std::isfinite(cfg.penalty.eps) || cfg.penalty.eps <= 0.0))
    fail("charbonnier epsilon must be > 0");
}

//////////////////////////////////////////////////////////////////////
// Flow field

// Per-pixel displacement with a validity mask. Solver output is integer
// valued; interpolation and upscaling produce real values.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw InputError("flow field dimensions must be positive");
    const auto n = static_cast<std::size_t>(w) * h;
    u.assign(n, 0.0f);
    v.assign(n, 0.0f);
    valid.assign(n, 1);
  }

  std::size_t size() const { return u.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto b : valid) n += b != 0;
    return n;
  }

  void set(int x, int y, float du, float dv, bool ok = true) {
    const auto i = index(x, y);
    u[i] = du;
    v[i] = dv;
    valid[i] = ok ? 1 : 0;
  }
};

}  // namespace fullflow
