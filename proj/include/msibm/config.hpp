#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace msibm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Where the right-image correspondence of left pixel (i,j) at disparity z
/// is looked for.
enum class SignConvention {
  Minus,  // right center (i, j - z); rectified left/right pairs
  Plus,   // right center (i, j + z)
};

inline const char* to_string(SignConvention s) {
  return s == SignConvention::Minus ? "minus" : "plus";
}

inline SignConvention parse_sign_convention(const std::string& name) {
  if (name == "middlebury" || name == "minus") return SignConvention::Minus;
  if (name == "paper" || name == "plus") return SignConvention::Plus;
  throw ConfigError("unknown sign convention '" + name +
                    "' (expected middlebury|minus or paper|plus)");
}

inline constexpr int kMaxBlock = 63;

struct MatchConfig {
  int d_max = 64;
  std::optional<int> levels;  // nullopt: choose automatically
  int base_block = 11;
  double alpha = 0.9;
  double beta = 0.9;
  double sigma_eps = 1e-6;
  SignConvention sign = SignConvention::Minus;
  int refine_radius = 1;  // averaged-DSI neighborhood, 3x3
  int median_radius = 2;  // selective median window, 5x5
  int threads = 1;        // 0: hardware concurrency
  std::size_t dsi_cache_bytes = std::size_t{256} << 20;  // reuse budget for full DSIs

  void validate() const {
    if (d_max < 1) throw ConfigError("d_max must be >= 1");
    if (levels && *levels < 0) throw ConfigError("levels must be >= 0");
    if (base_block < 3 || base_block % 2 == 0) {
      throw ConfigError("block size must be odd and >= 3, got " + std::to_string(base_block));
    }
    if (base_block > kMaxBlock) {
      throw ConfigError("block size must be <= " + std::to_string(kMaxBlock));
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0,1)");
    if (!(sigma_eps > 0.0)) throw ConfigError("sigma_eps must be positive");
    if (refine_radius < 0 || median_radius < 0) {
      throw ConfigError("neighborhood radii must be >= 0");
    }
    if (threads < 0) throw ConfigError("threads must be >= 0");
  }
};

}  // namespace msibm
