#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mvf {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Raised when tensor shapes or configuration fields are inconsistent.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A dense feature map with channels-first storage. values(c, s) holds
// channel c at flattened spatial index s = y * width + x.
template <typename Scalar>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Matrix<Scalar> values;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), values(Matrix<Scalar>::Zero(c, h * w)) {
    if (c <= 0 || h <= 0 || w <= 0) {
      throw config_error("FeatureMap dimensions must be positive");
    }
  }

  int positions() const { return height * width; }

  Scalar& at(int c, int y, int x) { return values(c, y * width + x); }
  Scalar at(int c, int y, int x) const { return values(c, y * width + x); }

  bool same_shape(const FeatureMap& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }
};

// Mean over spatial positions, one entry per channel.
template <typename Scalar>
Vector<Scalar> spatial_mean(const FeatureMap<Scalar>& map) {
  return map.values.rowwise().mean();
}

template <typename Scalar>
FeatureMap<Scalar> make_constant_map(int c, int h, int w, Scalar value) {
  FeatureMap<Scalar> map(c, h, w);
  map.values.setConstant(value);
  return map;
}

}  // namespace mvf
