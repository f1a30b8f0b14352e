#pragma once

// Middlebury .flo reader and writer.
//
// Layout (little-endian): float32 magic 202021.25 ("PIEH"), int32 width,
// int32 height, then width * height interleaved float32 (u, v) pairs in row
// major order. Components with magnitude above 1e9 mean "unknown".

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

inline constexpr float kFloMagic = 202021.25f;
inline constexpr float kUnknownFlowThreshold = 1e9f;
inline constexpr float kUnknownFlow = 1e10f;

static_assert(std::endian::native == std::endian::little, ".flo I/O assumes a little-endian host");

inline bool is_unknown_flow(float u, float v) {
  return std::abs(u) > kUnknownFlowThreshold || std::abs(v) > kUnknownFlowThreshold ||
         std::isnan(u) || std::isnan(v);
}

inline FlowField read_flo(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "'");
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  if (!is.read(reinterpret_cast<char*>(&magic), 4))
    throw FormatError(FormatError::Kind::Truncated, path + ": missing .flo header");
  if (magic != kFloMagic) throw FormatError(FormatError::Kind::BadMagic, path + ": bad .flo magic");
  if (!is.read(reinterpret_cast<char*>(&w), 4) || !is.read(reinterpret_cast<char*>(&h), 4))
    throw FormatError(FormatError::Kind::Truncated, path + ": truncated .flo header");
  constexpr std::int32_t kMaxSide = 1 << 16;
  if (w < 1 || h < 1 || w > kMaxSide || h > kMaxSide)
    throw FormatError(FormatError::Kind::BadDimensions,
                      path + ": invalid .flo dimensions " + std::to_string(w) + "x" + std::to_string(h));

  FlowField flow(w, h);
  std::vector<float> payload(static_cast<std::size_t>(w) * h * 2);
  const auto bytes = static_cast<std::streamsize>(payload.size() * sizeof(float));
  if (!is.read(reinterpret_cast<char*>(payload.data()), bytes))
    throw FormatError(FormatError::Kind::Truncated, path + ": truncated .flo payload");
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError(FormatError::Kind::BadDimensions, path + ": payload longer than header dimensions");
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.u[i] = payload[2 * i];
    flow.v[i] = payload[2 * i + 1];
    flow.valid[i] = is_unknown_flow(flow.u[i], flow.v[i]) ? 0 : 1;
  }
  return flow;
}

// Invalid pixels are written as the unknown sentinel unless they already
// carry one, so files read from disk round-trip bit for bit.
inline void write_flo(const FlowField& flow, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  const std::int32_t w = flow.width, h = flow.height;
  os.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  os.write(reinterpret_cast<const char*>(&w), 4);
  os.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> payload(flow.size() * 2);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    float u = flow.u[i], v = flow.v[i];
    if (!flow.valid[i] && !is_unknown_flow(u, v)) u = v = kUnknownFlow;
    payload[2 * i] = u;
    payload[2 * i + 1] = v;
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw InputError("failed writing '" + path + "'");
}

}  // namespace fullflow
