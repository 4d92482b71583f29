#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace msibm {

/// Pixel coordinate: row i, column j.
struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Dense row-major single-channel raster.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw std::invalid_argument("raster dimensions must be positive, got " +
                                  std::to_string(width) + "x" +
                                  std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0 ||
        data_.size() != static_cast<std::size_t>(width) * height) {
      throw std::invalid_argument("raster data does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  T& operator()(int row, int col) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  const T& operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& at(int row, int col) {
    check(row, col);
    return (*this)(row, col);
  }
  const T& at(int row, int col) const {
    check(row, col);
    return (*this)(row, col);
  }

  /// Replicate-padded read.
  const T& clamped(int row, int col) const {
    row = row < 0 ? 0 : (row >= height_ ? height_ - 1 : row);
    col = col < 0 ? 0 : (col >= width_ ? width_ - 1 : col);
    return (*this)(row, col);
  }

  T* row_ptr(int row) { return data_.data() + static_cast<std::size_t>(row) * width_; }
  const T* row_ptr(int row) const {
    return data_.data() + static_cast<std::size_t>(row) * width_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  void check(int row, int col) const {
    if (!contains(row, col)) {
      throw std::out_of_range("pixel (" + std::to_string(row) + "," +
                              std::to_string(col) + ") outside " +
                              std::to_string(width_) + "x" +
                              std::to_string(height_) + " raster");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities, nominally in [0,1].
using GrayImage = Raster<double>;

/// Per-pixel matched ZNCC cost in [-1,1].
using CostMap = Raster<double>;

/// Integer-valued disparities stored as float; NaN marks Invalid.
using DisparityMap = Raster<float>;

inline constexpr float kInvalidDisparity = std::numeric_limits<float>::quiet_NaN();

inline bool is_invalid(float d) { return std::isnan(d); }

/// Bitwise equality for disparity maps (NaN == NaN).
inline bool identical(const DisparityMap& a, const DisparityMap& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const float x = a.data()[k];
    const float y = b.data()[k];
    if (is_invalid(x) != is_invalid(y)) return false;
    if (!is_invalid(x) && x != y) return false;
  }
  return true;
}

/// Ground-truth disparities; unknown pixels carry the invalid flag.
struct GroundTruthDisparity {
  Raster<float> values;
  Raster<unsigned char> invalid;

  int width() const { return values.width(); }
  int height() const { return values.height(); }
  bool is_valid(int row, int col) const { return invalid(row, col) == 0; }
};

}  // namespace msibm
