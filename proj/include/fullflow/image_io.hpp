#pragma once

// 8-bit RGB image files: binary PPM (P6) and PNG. Samples are normalized to
// [0,1] on load and quantized to 8 bits on write.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fullflow/core.hpp"

namespace fullflow {

namespace detail {

inline std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i]) return false;
  return true;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string ppm_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

inline int parse_header_int(const std::string& tok, const std::string& what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9)
    throw FormatError(FormatError::Kind::Corrupt, "bad PPM " + what + " '" + tok + "'");
  return std::stoi(tok);
}

}  // namespace detail

inline Image decode_ppm(const std::vector<unsigned char>& buf, const std::string& name = "<memory>") {
  std::size_t pos = 0;
  if (detail::ppm_token(buf, pos) != "P6")
    throw FormatError(FormatError::Kind::Unsupported, name + ": not a binary PPM (P6)");
  const std::string tw = detail::ppm_token(buf, pos), th = detail::ppm_token(buf, pos),
                    tm = detail::ppm_token(buf, pos);
  if (tm.empty() || pos >= buf.size())
    throw FormatError(FormatError::Kind::Truncated, name + ": truncated PPM header");
  const int w = detail::parse_header_int(tw, "width");
  const int h = detail::parse_header_int(th, "height");
  const int maxval = detail::parse_header_int(tm, "maxval");
  if (w < 1 || h < 1) throw FormatError(FormatError::Kind::BadDimensions, name + ": PPM dimensions must be positive");
  if (maxval < 1 || maxval > 65535) throw FormatError(FormatError::Kind::Corrupt, name + ": PPM maxval out of range");
  ++pos;  // single whitespace byte after maxval
  const int bps = maxval < 256 ? 1 : 2;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3 * bps;
  if (buf.size() < pos + need) throw FormatError(FormatError::Kind::Truncated, name + ": truncated PPM payload");
  Image img(w, h);
  auto& data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t o = pos + i * bps;
    const unsigned v = bps == 1 ? buf[o] : (unsigned(buf[o]) << 8 | buf[o + 1]);
    data[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return img;
}

inline std::vector<unsigned char> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) out.push_back(detail::quantize(v));
  return out;
}

inline Image read_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw FormatError(FormatError::Kind::Corrupt, path + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(FormatError::Kind::Corrupt, path + ": " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  auto& data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw[i] / 255.0f;
  return img;
}

inline void write_png(const Image& img, const std::string& path) {
  std::vector<png_byte> raw(img.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = detail::quantize(img.data()[i]);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, raw.data(), 0, nullptr))
    throw InputError("cannot write '" + path + "': " + png.message);
}

// Dispatches on the file signature.
inline Image read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() >= 8 && std::equal(kPngSig, kPngSig + 8, buf.begin())) return read_png(path);
  if (buf.size() >= 2 && buf[0] == 'P' && buf[1] == '6') return decode_ppm(buf, path);
  throw FormatError(FormatError::Kind::Unsupported, path + ": unsupported image format (expected P6 PPM or PNG)");
}

// PNG for *.png, binary PPM otherwise.
inline void write_image(const Image& img, const std::string& path) {
  if (detail::ends_with(path, ".png")) return write_png(img, path);
  const auto bytes = encode_ppm(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw InputError("failed writing '" + path + "'");
}

}  // namespace fullflow
