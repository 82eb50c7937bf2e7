#pragma once

#include <cmath>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// Linear multinomial logistic probe. Used as an oracle: an attribute is
// readable from a view iff this probe separates it from the flattened raw
// features, with no fusion machinery in the loop.
struct ProbeOptions {
  int iters = 300;
  double lr = 0.05;  // Adam step size on the full batch
};

template <typename Scalar>
Vector<double> flatten_feature(const FeatureMap<Scalar>& map) {
  Vector<double> out(map.values.size());
  Eigen::Index i = 0;
  for (Eigen::Index c = 0; c < map.values.rows(); ++c) {
    for (Eigen::Index s = 0; s < map.values.cols(); ++s) {
      out(i++) = double(map.values(c, s));
    }
  }
  return out;
}

inline double linear_probe_accuracy(const std::vector<Vector<double>>& train_x,
                                    const std::vector<int>& train_y,
                                    const std::vector<Vector<double>>& test_x,
                                    const std::vector<int>& test_y,
                                    int num_classes,
                                    const ProbeOptions& opts = {}) {
  if (train_x.empty() || train_x.size() != train_y.size() ||
      test_x.size() != test_y.size() || test_x.empty()) {
    throw std::invalid_argument("linear_probe_accuracy: empty or mismatched data");
  }
  const Eigen::Index dim = train_x[0].size();
  const Eigen::Index n = Eigen::Index(train_x.size());

  // Standardize with train statistics; constant dims pass through unscaled.
  Vector<double> mean = Vector<double>::Zero(dim);
  for (const auto& x : train_x) mean += x;
  mean /= double(n);
  Vector<double> scale = Vector<double>::Zero(dim);
  for (const auto& x : train_x) scale += (x - mean).cwiseAbs2();
  scale = (scale / double(n)).cwiseSqrt();
  for (Eigen::Index d = 0; d < dim; ++d) {
    scale(d) = scale(d) > 1e-12 ? 1.0 / scale(d) : 1.0;
  }

  Matrix<double> X(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.col(i) = (train_x[size_t(i)] - mean).cwiseProduct(scale);
  }

  Matrix<double> W = Matrix<double>::Zero(num_classes, dim);
  Vector<double> b = Vector<double>::Zero(num_classes);
  Matrix<double> mW = W, vW = W;
  Vector<double> mb = b, vb = b;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  for (int it = 1; it <= opts.iters; ++it) {
    Matrix<double> logits = (W * X).colwise() + b;
    Matrix<double> probs(num_classes, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector<double> z = logits.col(i);
      z.array() -= z.maxCoeff();
      Vector<double> e = z.array().exp();
      probs.col(i) = e / e.sum();
    }
    for (Eigen::Index i = 0; i < n; ++i) probs(train_y[size_t(i)], i) -= 1.0;
    probs /= double(n);
    Matrix<double> gW = probs * X.transpose();
    Vector<double> gb = probs.rowwise().sum();

    const double c1 = 1.0 - std::pow(beta1, it);
    const double c2 = 1.0 - std::pow(beta2, it);
    mW = beta1 * mW + (1.0 - beta1) * gW;
    vW = beta2 * vW + (1.0 - beta2) * gW.cwiseAbs2();
    mb = beta1 * mb + (1.0 - beta1) * gb;
    vb = beta2 * vb + (1.0 - beta2) * gb.cwiseAbs2();
    W -= opts.lr * (mW / c1).cwiseQuotient(((vW / c2).cwiseSqrt().array() + eps).matrix());
    b -= opts.lr * (mb / c1).cwiseQuotient(((vb / c2).cwiseSqrt().array() + eps).matrix());
  }

  int correct = 0;
  for (size_t i = 0; i < test_x.size(); ++i) {
    Vector<double> z = W * (test_x[i] - mean).cwiseProduct(scale) + b;
    Eigen::Index best = 0;
    z.maxCoeff(&best);
    if (int(best) == test_y[i]) ++correct;
  }
  return double(correct) / double(test_x.size());
}

}  // namespace mvf
