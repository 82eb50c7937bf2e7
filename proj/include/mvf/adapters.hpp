#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// Desk-scale stand-in for a photo: RGB in [0,1].
struct SyntheticImage {
  FeatureMap<double> pixels;  // channels = 3 (R, G, B)
  std::map<std::string, double> meta;

  SyntheticImage() = default;
  SyntheticImage(int h, int w) : pixels(3, h, w) {
    if (h < 8 || w < 8) throw config_error("SyntheticImage must be at least 8x8");
  }
  int height() const { return pixels.height; }
  int width() const { return pixels.width; }
};

// A pluggable encoder view. encode is a pure function of the image.
template <typename Scalar>
struct EncoderAdapter {
  std::string name;
  int channels = 0, height = 0, width = 0;
  std::function<FeatureMap<Scalar>(const SyntheticImage&)> encode;
};

template <typename Scalar>
struct TextEncoderAdapter {
  std::string name;
  int dim = 0;
  std::function<Vector<Scalar>(const std::string&)> embed;
};

namespace detail {

inline Matrix<double> gray_of(const SyntheticImage& img) {
  return (img.pixels.values.row(0) + img.pixels.values.row(1) +
          img.pixels.values.row(2)) /
         3.0;
}

inline void require_divisible(const SyntheticImage& img, int out_h, int out_w,
                              const std::string& name) {
  if (img.height() % out_h != 0 || img.width() % out_w != 0) {
    throw config_error(name + ": image size must be divisible by native shape");
  }
}

// Average-pool a single-channel row-flattened map (stride = cell size).
inline Matrix<double> pool_plane(const Matrix<double>& plane, int h, int w,
                                 int out_h, int out_w) {
  const int cell_h = h / out_h, cell_w = w / out_w;
  Matrix<double> out = Matrix<double>::Zero(1, out_h * out_w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(0, (y / cell_h) * out_w + (x / cell_w)) += plane(0, y * w + x);
    }
  }
  return out / double(cell_h * cell_w);
}

}  // namespace detail

// The four mock views. Each has a distinct native shape and a known, narrow
// inductive bias:
//   downsample  1 x 8 x 8    gray average-pool (absolute brightness)
//   edge        2 x 16 x 16  |dx|, |dy| of gray with periodic wrap, pooled 2x2
//   stat        2 x 4 x 4    per-cell [gray minimum, |chroma axis (1,1,-2)|]
//   blur        3 x 4 x 4    binomial-smoothed RGB, pooled, per-channel mean-free
// stat's order statistic entangles brightness with texture depth and blur
// subtracts its mean, so absolute brightness stays the downsample view's
// signal; stat's chroma axis is orthogonal to the warm/cold tint axis, which
// keeps tint strength exclusive to blur.
template <typename Scalar>
EncoderAdapter<Scalar> make_mock_encoder(const std::string& name) {
  EncoderAdapter<Scalar> adapter;
  adapter.name = name;
  if (name == "downsample") {
    adapter.channels = 1;
    adapter.height = adapter.width = 8;
    adapter.encode = [](const SyntheticImage& img) {
      detail::require_divisible(img, 8, 8, "downsample");
      FeatureMap<Scalar> out(1, 8, 8);
      out.values = detail::pool_plane(detail::gray_of(img), img.height(),
                                      img.width(), 8, 8)
                       .template cast<Scalar>();
      return out;
    };
  } else if (name == "edge") {
    adapter.channels = 2;
    adapter.height = adapter.width = 16;
    adapter.encode = [](const SyntheticImage& img) {
      detail::require_divisible(img, 16, 16, "edge");
      const int h = img.height(), w = img.width();
      Matrix<double> gray = detail::gray_of(img);
      Matrix<double> adx(1, h * w), ady(1, h * w);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double g = gray(0, y * w + x);
          adx(0, y * w + x) = std::abs(gray(0, y * w + (x + 1) % w) - g);
          ady(0, y * w + x) = std::abs(gray(0, ((y + 1) % h) * w + x) - g);
        }
      }
      FeatureMap<Scalar> out(2, 16, 16);
      out.values.row(0) =
          detail::pool_plane(adx, h, w, 16, 16).template cast<Scalar>();
      out.values.row(1) =
          detail::pool_plane(ady, h, w, 16, 16).template cast<Scalar>();
      return out;
    };
  } else if (name == "stat") {
    adapter.channels = 2;
    adapter.height = adapter.width = 4;
    adapter.encode = [](const SyntheticImage& img) {
      detail::require_divisible(img, 4, 4, "stat");
      const int h = img.height(), w = img.width();
      const int cell_h = h / 4, cell_w = w / 4;
      Matrix<double> gray = detail::gray_of(img);
      const double inv_sqrt6 = 1.0 / std::sqrt(6.0);
      FeatureMap<Scalar> out(2, 4, 4);
      for (int cy = 0; cy < 4; ++cy) {
        for (int cx = 0; cx < 4; ++cx) {
          const double count = double(cell_h * cell_w);
          double lo = std::numeric_limits<double>::infinity();
          double chroma = 0.0;
          for (int y = cy * cell_h; y < (cy + 1) * cell_h; ++y) {
            for (int x = cx * cell_w; x < (cx + 1) * cell_w; ++x) {
              const int s = y * w + x;
              const double g = gray(0, s);
              lo = std::min(lo, g);
              // |projection of the chroma vector on (1,1,-2)/sqrt(6)|
              chroma += std::abs(((img.pixels.values(0, s) - g) +
                                  (img.pixels.values(1, s) - g) -
                                  2.0 * (img.pixels.values(2, s) - g)) *
                                 inv_sqrt6);
            }
          }
          out.at(0, cy, cx) = Scalar(lo);
          out.at(1, cy, cx) = Scalar(chroma / count);
        }
      }
      return out;
    };
  } else if (name == "blur") {
    adapter.channels = 3;
    adapter.height = adapter.width = 4;
    adapter.encode = [](const SyntheticImage& img) {
      detail::require_divisible(img, 4, 4, "blur");
      const int h = img.height(), w = img.width();
      // Separable binomial smoothing with periodic wrap, per RGB channel.
      const double kernel[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
      FeatureMap<Scalar> out(3, 4, 4);
      Matrix<double> tmp(1, h * w), smooth(1, h * w);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -2; j <= 2; ++j) {
              acc += kernel[j + 2] * img.pixels.values(c, y * w + (x + j + w) % w);
            }
            tmp(0, y * w + x) = acc;
          }
        }
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -2; j <= 2; ++j) {
              acc += kernel[j + 2] * tmp(0, ((y + j + h) % h) * w + x);
            }
            smooth(0, y * w + x) = acc;
          }
        }
        Matrix<double> pooled = detail::pool_plane(smooth, h, w, 4, 4);
        pooled.array() -= pooled.mean();  // mean-free: contrast only
        out.values.row(c) = pooled.template cast<Scalar>();
      }
      return out;
    };
  } else {
    throw config_error("unknown mock encoder: " + name);
  }
  return adapter;
}

template <typename Scalar>
std::vector<EncoderAdapter<Scalar>> mock_encoders(
    const std::vector<std::string>& names = {"downsample", "edge", "stat",
                                             "blur"}) {
  std::vector<EncoderAdapter<Scalar>> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(make_mock_encoder<Scalar>(name));
  return out;
}

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : s) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace detail

// Deterministic bag-of-tokens embedder: whitespace tokens index a fixed
// seeded table of dim-dimensional vectors; the embedding is the token mean.
// The empty string maps to the zero vector.
template <typename Scalar>
TextEncoderAdapter<Scalar> mock_text_encoder(int dim, std::uint64_t seed = 9001,
                                             int table_size = 4096) {
  if (dim < 1 || table_size < 1) {
    throw config_error("mock_text_encoder: dim and table size must be positive");
  }
  auto table = std::make_shared<Matrix<Scalar>>(dim, table_size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int c = 0; c < table_size; ++c) {
    for (int r = 0; r < dim; ++r) (*table)(r, c) = Scalar(dist(rng));
  }

  TextEncoderAdapter<Scalar> adapter;
  adapter.name = "hash-bag";
  adapter.dim = dim;
  adapter.embed = [table, dim, table_size](const std::string& text) {
    std::istringstream stream(text);
    std::string token;
    std::vector<Eigen::Index> rows;
    while (stream >> token) {
      rows.push_back(static_cast<Eigen::Index>(
          detail::fnv1a(token) % static_cast<std::uint64_t>(table_size)));
    }
    if (rows.empty()) return Vector<Scalar>(Vector<Scalar>::Zero(dim));
    // Summing in table order makes the bag exactly order-free.
    std::sort(rows.begin(), rows.end());
    Vector<Scalar> sum = Vector<Scalar>::Zero(dim);
    for (Eigen::Index r : rows) sum += table->col(r);
    return Vector<Scalar>((sum / Scalar(rows.size())).eval());
  };
  return adapter;
}

}  // namespace mvf
