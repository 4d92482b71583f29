#pragma once

// Readers and writers for PGM/PPM, PFM and Middlebury calib.txt.
// Decoding works on in-memory byte buffers; the path-based overloads only
// add file I/O around them.

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msibm/image.hpp"

namespace msibm {

enum class DecodeErrorKind {
  MalformedHeader,
  TruncatedPayload,
  BadMaxval,
  BadSample,
  BadMagic,
  ZeroScale,
  MissingKey,
};

inline const char* to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::MalformedHeader: return "malformed header";
    case DecodeErrorKind::TruncatedPayload: return "truncated payload";
    case DecodeErrorKind::BadMaxval: return "maxval out of range";
    case DecodeErrorKind::BadSample: return "sample exceeds maxval";
    case DecodeErrorKind::BadMagic: return "bad magic";
    case DecodeErrorKind::ZeroScale: return "zero scale";
    case DecodeErrorKind::MissingKey: return "missing key";
  }
  return "decode error";
}

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

 private:
  DecodeErrorKind kind_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibInfo {
  int ndisp = 0;
  int width = 0;   // 0 when absent
  int height = 0;  // 0 when absent
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

/// Tokenizer for the whitespace/comment separated netpbm headers.
class HeaderCursor {
 public:
  explicit HeaderCursor(std::string_view bytes) : bytes_(bytes) {}

  std::string_view token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(uc(bytes_[pos_])) &&
           bytes_[pos_] != '#') {
      ++pos_;
    }
    if (start == pos_) {
      throw DecodeError(DecodeErrorKind::MalformedHeader, "unexpected end of header");
    }
    return bytes_.substr(start, pos_ - start);
  }

  long integer(const char* what) {
    const std::string_view tok = token();
    long value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw DecodeError(DecodeErrorKind::MalformedHeader,
                        std::string("expected integer for ") + what + ", got '" +
                            std::string(tok) + "'");
    }
    return value;
  }

  /// Consumes exactly one whitespace byte ending the header.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(uc(bytes_[pos_]))) {
      throw DecodeError(DecodeErrorKind::MalformedHeader,
                        "missing whitespace after header");
    }
    ++pos_;
  }

  std::size_t position() const { return pos_; }

 private:
  static unsigned char uc(char c) { return static_cast<unsigned char>(c); }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(uc(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
inline float bits_float(std::uint32_t u) { return std::bit_cast<float>(u); }

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM / PPM

/// Decodes P2/P3/P5/P6 into intensities normalized by maxval. Color inputs
/// are reduced to luminance (0.299R + 0.587G + 0.114B).
inline GrayImage decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "not a netpbm file");
  }
  const char kind = bytes[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw DecodeError(DecodeErrorKind::MalformedHeader,
                      std::string("unsupported netpbm variant P") + kind);
  }
  const bool ascii = kind == '2' || kind == '3';
  const int channels = (kind == '3' || kind == '6') ? 3 : 1;

  detail::HeaderCursor cursor(bytes.substr(2));
  if (bytes.size() == 2) {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "header ends after magic");
  }
  const long width = cursor.integer("width");
  const long height = cursor.integer("height");
  if (width <= 0 || height <= 0 || width > (1L << 20) || height > (1L << 20)) {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "bad dimensions");
  }
  const long maxval = cursor.integer("maxval");
  if (maxval < 1 || maxval > 65535) {
    throw DecodeError(DecodeErrorKind::BadMaxval, std::to_string(maxval));
  }

  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  std::vector<long> raw(samples);
  if (ascii) {
    for (std::size_t s = 0; s < samples; ++s) {
      try {
        raw[s] = cursor.integer("sample");
      } catch (const DecodeError&) {
        throw DecodeError(DecodeErrorKind::TruncatedPayload,
                          "expected " + std::to_string(samples) + " samples, got " +
                              std::to_string(s));
      }
    }
  } else {
    cursor.end_header();
    const std::size_t start = 2 + cursor.position();
    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    if (bytes.size() - start < samples * bytes_per_sample) {
      throw DecodeError(DecodeErrorKind::TruncatedPayload,
                        "need " + std::to_string(samples * bytes_per_sample) +
                            " payload bytes, have " + std::to_string(bytes.size() - start));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (std::size_t s = 0; s < samples; ++s) {
      raw[s] = bytes_per_sample == 1 ? p[s] : (p[2 * s] << 8) | p[2 * s + 1];
    }
  }

  GrayImage image(static_cast<int>(width), static_cast<int>(height));
  const double scale = static_cast<double>(maxval);
  for (std::size_t px = 0; px < image.size(); ++px) {
    double rgb[3] = {0, 0, 0};
    for (int c = 0; c < channels; ++c) {
      const long v = raw[px * channels + c];
      if (v < 0 || v > maxval) {
        throw DecodeError(DecodeErrorKind::BadSample,
                          std::to_string(v) + " > " + std::to_string(maxval));
      }
      rgb[c] = static_cast<double>(v) / scale;
    }
    image.data()[px] = channels == 1 ? rgb[0] : detail::luminance(rgb[0], rgb[1], rgb[2]);
  }
  return image;
}

inline GrayImage read_pgm_pnm(const std::string& path) {
  return decode_pnm(detail::read_file(path));
}

/// Binary P5 encoding of [0,1] intensities, rounded to maxval steps.
inline std::string encode_pgm(const GrayImage& image, int maxval = 255) {
  if (image.empty()) throw std::invalid_argument("cannot encode an empty image");
  if (maxval < 1 || maxval > 65535) throw std::invalid_argument("maxval must be in [1, 65535]");
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n" + std::to_string(maxval) + "\n";
  const bool wide = maxval > 255;
  out.reserve(out.size() + image.size() * (wide ? 2 : 1));
  for (double v : image.data()) {
    const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(clamped * maxval));
    if (wide) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xFF));
  }
  return out;
}

inline void write_pgm(const GrayImage& image, const std::string& path, int maxval = 255) {
  detail::write_file(path, encode_pgm(image, maxval));
}

/// Disparity preview: [0, d_max] maps linearly to [0, maxval], Invalid to 0.
inline GrayImage disparity_preview(const DisparityMap& map, double d_max) {
  if (map.empty()) throw std::invalid_argument("cannot preview an empty disparity map");
  if (!(d_max > 0)) throw std::invalid_argument("d_max must be positive");
  GrayImage out(map.width(), map.height());
  for (std::size_t k = 0; k < map.size(); ++k) {
    const float d = map.data()[k];
    out.data()[k] = is_invalid(d) ? 0.0 : std::clamp(d / d_max, 0.0, 1.0);
  }
  return out;
}

inline void write_pgm(const DisparityMap& map, const std::string& path, double d_max,
                      int maxval = 255) {
  write_pgm(disparity_preview(map, d_max), path, maxval);
}

// ---------------------------------------------------------------------------
// PFM

/// Decodes a single-channel "Pf" file into top-down rows, bit-exact.
inline Raster<float> decode_pfm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != "Pf") {
    throw DecodeError(DecodeErrorKind::BadMagic, "expected 'Pf'");
  }
  detail::HeaderCursor cursor(bytes.substr(2));
  const long width = cursor.integer("width");
  const long height = cursor.integer("height");
  if (width <= 0 || height <= 0 || width > (1L << 20) || height > (1L << 20)) {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "bad dimensions");
  }
  const std::string scale_token(cursor.token());
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_token, &used);
    if (used != scale_token.size()) throw std::invalid_argument(scale_token);
  } catch (const std::exception&) {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "bad scale '" + scale_token + "'");
  }
  if (scale == 0.0) throw DecodeError(DecodeErrorKind::ZeroScale, "scale must be nonzero");
  cursor.end_header();

  const bool little = scale < 0;
  const std::size_t start = 2 + cursor.position();
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - start < count * 4) {
    throw DecodeError(DecodeErrorKind::TruncatedPayload,
                      "need " + std::to_string(count * 4) + " payload bytes, have " +
                          std::to_string(bytes.size() - start));
  }
  Raster<float> out(static_cast<int>(width), static_cast<int>(height));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (long r = 0; r < height; ++r) {
    const long disk_row = height - 1 - r;
    for (long c = 0; c < width; ++c) {
      const unsigned char* b = p + 4 * (disk_row * width + c);
      const std::uint32_t u =
          little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
                    std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24)
                 : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 |
                    std::uint32_t{b[1]} << 16 | std::uint32_t{b[0]} << 24);
      out(static_cast<int>(r), static_cast<int>(c)) = detail::bits_float(u);
    }
  }
  return out;
}

/// Encodes a float raster as "Pf". Invalid (NaN) entries are stored as +inf.
inline std::string encode_pfm(const Raster<float>& map, bool little_endian = true) {
  if (map.empty()) throw std::invalid_argument("cannot encode an empty map");
  std::string out = "Pf\n" + std::to_string(map.width()) + " " +
                    std::to_string(map.height()) + "\n" +
                    (little_endian ? "-1.0" : "1.0") + "\n";
  const std::size_t header = out.size();
  out.resize(header + map.size() * 4);
  auto* p = reinterpret_cast<unsigned char*>(out.data() + header);
  for (int r = map.height() - 1; r >= 0; --r) {
    for (int c = 0; c < map.width(); ++c) {
      float v = map(r, c);
      if (is_invalid(v)) v = std::numeric_limits<float>::infinity();
      const std::uint32_t u = detail::float_bits(v);
      for (int b = 0; b < 4; ++b) {
        const int shift = little_endian ? 8 * b : 8 * (3 - b);
        *p++ = static_cast<unsigned char>((u >> shift) & 0xFF);
      }
    }
  }
  return out;
}

inline Raster<float> to_float(const CostMap& cost) {
  Raster<float> out(cost.width(), cost.height());
  std::transform(cost.data().begin(), cost.data().end(), out.data().begin(),
                 [](double v) { return static_cast<float>(v); });
  return out;
}

inline void write_pfm(const Raster<float>& map, const std::string& path,
                      bool little_endian = true) {
  detail::write_file(path, encode_pfm(map, little_endian));
}

inline Raster<float> read_pfm_raw(const std::string& path) {
  return decode_pfm(detail::read_file(path));
}

/// Ground truth view of a PFM: non-finite or negative entries are masked.
inline GroundTruthDisparity to_ground_truth(Raster<float> values) {
  GroundTruthDisparity gt{std::move(values), {}};
  gt.invalid = Raster<unsigned char>(gt.values.width(), gt.values.height(), 0);
  for (std::size_t k = 0; k < gt.values.size(); ++k) {
    const float v = gt.values.data()[k];
    if (!std::isfinite(v) || v < 0.0f) gt.invalid.data()[k] = 1;
  }
  return gt;
}

inline GroundTruthDisparity read_pfm(const std::string& path) {
  return to_ground_truth(read_pfm_raw(path));
}

/// Disparity map view of a PFM: +inf and NaN become Invalid.
inline DisparityMap read_disparity_pfm(const std::string& path) {
  DisparityMap map = read_pfm_raw(path);
  for (float& v : map.data()) {
    if (!std::isfinite(v)) v = kInvalidDisparity;
  }
  return map;
}

// ---------------------------------------------------------------------------
// calib.txt

inline CalibInfo parse_calib(std::string_view text) {
  CalibInfo info;
  bool have_ndisp = false;
  std::istringstream in{std::string(text)};
  std::string line;
  auto parse_int = [](const std::string& key, std::string value) {
    value.erase(0, value.find_first_not_of(" \t\r"));
    value.erase(value.find_last_not_of(" \t\r") + 1);
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw DecodeError(DecodeErrorKind::MalformedHeader,
                        "calib key '" + key + "' is not an integer: '" + value + "'");
    }
    return out;
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    const std::string value = line.substr(eq + 1);
    if (key == "ndisp") {
      info.ndisp = parse_int(key, value);
      have_ndisp = true;
    } else if (key == "width") {
      info.width = parse_int(key, value);
    } else if (key == "height") {
      info.height = parse_int(key, value);
    }
  }
  if (!have_ndisp) throw DecodeError(DecodeErrorKind::MissingKey, "ndisp");
  if (info.ndisp < 1) {
    throw DecodeError(DecodeErrorKind::MalformedHeader, "ndisp must be >= 1");
  }
  return info;
}

inline CalibInfo read_calib(const std::string& path) {
  return parse_calib(detail::read_file(path));
}

}  // namespace msibm
