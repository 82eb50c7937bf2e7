#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// Sums values in ascending order so the result depends only on the multiset,
// not on the caller's ordering. Every reduction indexed by encoder uses this;
// it is what makes encoder permutation equivariance hold bit for bit.
template <typename Scalar>
Scalar canonical_sum(std::vector<Scalar> values) {
  std::sort(values.begin(), values.end());
  Scalar total = 0;
  for (Scalar v : values) total += v;
  return total;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& z) {
  Vector<Scalar> out = (z.array() - z.maxCoeff()).exp();
  return out / out.sum();
}

// Softmax whose normalizer is a canonical_sum, for distributions indexed by
// encoder.
template <typename Scalar>
Vector<Scalar> softmax_canonical(const Vector<Scalar>& z) {
  Vector<Scalar> e = (z.array() - z.maxCoeff()).exp();
  std::vector<Scalar> terms(e.data(), e.data() + e.size());
  Scalar denom = canonical_sum(terms);
  return e / denom;
}

// d(softmax)/dz applied to an upstream gradient: dz = y .* (dy - <dy, y>).
template <typename Scalar>
Vector<Scalar> softmax_backward(const Vector<Scalar>& y, const Vector<Scalar>& dy) {
  Scalar dot = y.dot(dy);
  return (y.array() * (dy.array() - dot)).matrix();
}

// Row-wise softmax over a matrix of scores (each row is one distribution).
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& z) {
  Matrix<Scalar> out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Vector<Scalar> row = z.row(r).transpose();
    out.row(r) = softmax<Scalar>(row).transpose();
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& dy) {
  Matrix<Scalar> dz(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    Scalar dot = y.row(r).dot(dy.row(r));
    dz.row(r) = y.row(r).array() * (dy.row(r).array() - dot);
  }
  return dz;
}

// Exact (erf-based) GELU. The smooth form keeps finite-difference gradient
// checks clean.
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / Scalar(std::sqrt(2.0))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar inv_sqrt2 = Scalar(1) / Scalar(std::sqrt(2.0));
  const Scalar inv_sqrt2pi = Scalar(1) / Scalar(std::sqrt(2.0 * M_PI));
  Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2));
  Scalar pdf = inv_sqrt2pi * std::exp(Scalar(-0.5) * x * x);
  return cdf + x * pdf;
}

template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return gelu(v); });
}

template <typename Scalar>
Matrix<Scalar> gelu_grad(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return gelu_grad(v); });
}

// Per-column layer normalization over the channel axis with affine scale and
// shift. Columns are tokens.
template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> input;
  Matrix<Scalar> normalized;
  Vector<Scalar> inv_std;  // one entry per column
};

template <typename Scalar>
Matrix<Scalar> layernorm(const Matrix<Scalar>& x, const Vector<Scalar>& gamma,
                         const Vector<Scalar>& beta, LayerNormCache<Scalar>* cache = nullptr,
                         Scalar eps = Scalar(1e-5)) {
  const Eigen::Index c = x.rows();
  Matrix<Scalar> normalized(x.rows(), x.cols());
  Vector<Scalar> inv_std(x.cols());
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    Scalar mean = x.col(s).mean();
    Vector<Scalar> centered = x.col(s).array() - mean;
    Scalar var = centered.squaredNorm() / Scalar(c);
    Scalar inv = Scalar(1) / std::sqrt(var + eps);
    normalized.col(s) = centered * inv;
    inv_std(s) = inv;
  }
  Matrix<Scalar> out =
      (normalized.array().colwise() * gamma.array()).colwise() + beta.array();
  if (cache) {
    cache->input = x;
    cache->normalized = normalized;
    cache->inv_std = inv_std;
  }
  return out;
}

template <typename Scalar>
struct LayerNormGrads {
  Matrix<Scalar> d_input;
  Vector<Scalar> d_gamma;
  Vector<Scalar> d_beta;
};

template <typename Scalar>
LayerNormGrads<Scalar> layernorm_backward(const Matrix<Scalar>& d_out,
                                          const LayerNormCache<Scalar>& cache,
                                          const Vector<Scalar>& gamma) {
  LayerNormGrads<Scalar> grads;
  grads.d_gamma = (d_out.array() * cache.normalized.array()).rowwise().sum();
  grads.d_beta = d_out.rowwise().sum();
  grads.d_input.resize(d_out.rows(), d_out.cols());
  for (Eigen::Index s = 0; s < d_out.cols(); ++s) {
    Vector<Scalar> d_norm = d_out.col(s).array() * gamma.array();
    Scalar mean_dn = d_norm.mean();
    Scalar mean_dn_xn = (d_norm.array() * cache.normalized.col(s).array()).mean();
    grads.d_input.col(s) =
        cache.inv_std(s) *
        (d_norm.array() - mean_dn - cache.normalized.col(s).array() * mean_dn_xn);
  }
  return grads;
}

// y = W x + b per column; bias broadcast across columns.
template <typename Scalar>
Matrix<Scalar> linear(const Matrix<Scalar>& W, const Vector<Scalar>& b,
                      const Matrix<Scalar>& x) {
  return (W * x).colwise() + b;
}

}  // namespace mvf
