#pragma once

#include <cmath>

#include "mvf/types.hpp"

namespace mvf {

namespace detail {

// Align-corners source coordinate for output index i: the first and last
// output samples land exactly on the first and last source samples. A
// single-sample axis (either side) reads the source origin.
template <typename Scalar>
Scalar source_coord(int i, int dst, int src) {
  if (dst <= 1 || src <= 1) return Scalar(0);
  return Scalar(i) * Scalar(src - 1) / Scalar(dst - 1);
}

struct AxisSample {
  int lo;
  int hi;
  double frac;
};

inline AxisSample axis_sample(int i, int dst, int src) {
  double coord = source_coord<double>(i, dst, src);
  int lo = static_cast<int>(std::floor(coord));
  if (lo > src - 2) lo = src - 2;
  if (lo < 0) lo = 0;
  int hi = src > 1 ? lo + 1 : 0;
  return {lo, hi, coord - lo};
}

}  // namespace detail

// Bilinear resampling of the spatial grid to (out_h, out_w); channels are
// independent. Implemented as nested lerps v0 + frac * (v1 - v0), so constant
// maps are preserved exactly. Same-size calls return a verbatim copy.
template <typename Scalar>
FeatureMap<Scalar> interpolate_bilinear(const FeatureMap<Scalar>& src, int out_h,
                                        int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("interpolate_bilinear: target size must be positive");
  }
  if (out_h == src.height && out_w == src.width) return src;

  FeatureMap<Scalar> dst(src.channels, out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    detail::AxisSample ys = detail::axis_sample(y, out_h, src.height);
    for (int x = 0; x < out_w; ++x) {
      detail::AxisSample xs = detail::axis_sample(x, out_w, src.width);
      int s00 = ys.lo * src.width + xs.lo;
      int s01 = ys.lo * src.width + xs.hi;
      int s10 = ys.hi * src.width + xs.lo;
      int s11 = ys.hi * src.width + xs.hi;
      int d = y * out_w + x;
      for (int c = 0; c < src.channels; ++c) {
        Scalar top = src.values(c, s00) +
                     Scalar(xs.frac) * (src.values(c, s01) - src.values(c, s00));
        Scalar bot = src.values(c, s10) +
                     Scalar(xs.frac) * (src.values(c, s11) - src.values(c, s10));
        dst.values(c, d) = top + Scalar(ys.frac) * (bot - top);
      }
    }
  }
  return dst;
}

// Adjoint of interpolate_bilinear: scatters output-grid gradients back onto
// the source grid with the same sampling weights. Satisfies
// <interp(x), g> == <x, adjoint(g)> up to roundoff.
template <typename Scalar>
FeatureMap<Scalar> interpolate_bilinear_adjoint(const FeatureMap<Scalar>& d_dst,
                                                int src_h, int src_w) {
  if (src_h == d_dst.height && src_w == d_dst.width) return d_dst;

  FeatureMap<Scalar> d_src(d_dst.channels, src_h, src_w);
  for (int y = 0; y < d_dst.height; ++y) {
    detail::AxisSample ys = detail::axis_sample(y, d_dst.height, src_h);
    for (int x = 0; x < d_dst.width; ++x) {
      detail::AxisSample xs = detail::axis_sample(x, d_dst.width, src_w);
      Scalar wy1 = Scalar(ys.frac);
      Scalar wy0 = Scalar(1) - wy1;
      Scalar wx1 = Scalar(xs.frac);
      Scalar wx0 = Scalar(1) - wx1;
      int s00 = ys.lo * src_w + xs.lo;
      int s01 = ys.lo * src_w + xs.hi;
      int s10 = ys.hi * src_w + xs.lo;
      int s11 = ys.hi * src_w + xs.hi;
      int d = y * d_dst.width + x;
      for (int c = 0; c < d_dst.channels; ++c) {
        Scalar g = d_dst.values(c, d);
        d_src.values(c, s00) += wy0 * wx0 * g;
        d_src.values(c, s01) += wy0 * wx1 * g;
        d_src.values(c, s10) += wy1 * wx0 * g;
        d_src.values(c, s11) += wy1 * wx1 * g;
      }
    }
  }
  return d_src;
}

}  // namespace mvf
