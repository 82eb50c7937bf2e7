#pragma once

#include <cmath>
#include <vector>

#include "mvf/nn.hpp"
#include "mvf/types.hpp"

namespace mvf {

// Multi-head scaled dot-product attention over column-token matrices.
// `queries` is C x S_q, `source` is C x S_kv; heads split the channel axis.
// Wo is optional (extraction attention has no output projection).
template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> queries, source;
  Matrix<Scalar> Qp, Kp, Vp;
  std::vector<Matrix<Scalar>> probs;  // per head, S_q x S_kv
  Matrix<Scalar> concat;              // C x S_q, pre-output-projection
};

template <typename Scalar>
Matrix<Scalar> multihead_attention(const Matrix<Scalar>& queries,
                                   const Matrix<Scalar>& source,
                                   const Matrix<Scalar>& Wq, const Matrix<Scalar>& Wk,
                                   const Matrix<Scalar>& Wv, const Matrix<Scalar>* Wo,
                                   int heads, AttentionCache<Scalar>* cache = nullptr) {
  const Eigen::Index C = Wq.rows();
  if (queries.rows() != Wq.cols() || source.rows() != Wk.cols()) {
    throw config_error("attention: token dim does not match projections");
  }
  if (heads < 1 || C % heads != 0) {
    throw config_error("attention: heads must divide channels");
  }
  const Eigen::Index d = C / heads;
  const Scalar scale = Scalar(1) / Scalar(std::sqrt(static_cast<double>(d)));

  Matrix<Scalar> Qp = Wq * queries;
  Matrix<Scalar> Kp = Wk * source;
  Matrix<Scalar> Vp = Wv * source;

  Matrix<Scalar> concat(C, queries.cols());
  std::vector<Matrix<Scalar>> probs(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto Qh = Qp.middleRows(h * d, d);
    auto Kh = Kp.middleRows(h * d, d);
    auto Vh = Vp.middleRows(h * d, d);
    Matrix<Scalar> scores = (Qh.transpose() * Kh) * scale;  // S_q x S_kv
    Matrix<Scalar> P = softmax_rows(scores);
    concat.middleRows(h * d, d) = Vh * P.transpose();
    probs[static_cast<std::size_t>(h)] = std::move(P);
  }

  Matrix<Scalar> out = Wo ? Matrix<Scalar>(*Wo * concat) : concat;
  if (cache) {
    cache->queries = queries;
    cache->source = source;
    cache->Qp = std::move(Qp);
    cache->Kp = std::move(Kp);
    cache->Vp = std::move(Vp);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

template <typename Scalar>
struct AttentionGrads {
  Matrix<Scalar> dWq, dWk, dWv, dWo;
  Matrix<Scalar> d_queries, d_source;
};

template <typename Scalar>
AttentionGrads<Scalar> multihead_attention_backward(
    const Matrix<Scalar>& d_out, const AttentionCache<Scalar>& cache,
    const Matrix<Scalar>& Wq, const Matrix<Scalar>& Wk, const Matrix<Scalar>& Wv,
    const Matrix<Scalar>* Wo, int heads) {
  const Eigen::Index C = Wq.rows();
  const Eigen::Index d = C / heads;
  const Scalar scale = Scalar(1) / Scalar(std::sqrt(static_cast<double>(d)));

  AttentionGrads<Scalar> g;
  Matrix<Scalar> d_concat;
  if (Wo) {
    g.dWo = d_out * cache.concat.transpose();
    d_concat = Wo->transpose() * d_out;
  } else {
    g.dWo.resize(0, 0);
    d_concat = d_out;
  }

  Matrix<Scalar> dQp = Matrix<Scalar>::Zero(C, cache.queries.cols());
  Matrix<Scalar> dKp = Matrix<Scalar>::Zero(C, cache.source.cols());
  Matrix<Scalar> dVp = Matrix<Scalar>::Zero(C, cache.source.cols());
  for (int h = 0; h < heads; ++h) {
    const Matrix<Scalar>& P = cache.probs[static_cast<std::size_t>(h)];
    auto dOh = d_concat.middleRows(h * d, d);
    auto Qh = cache.Qp.middleRows(h * d, d);
    auto Kh = cache.Kp.middleRows(h * d, d);
    auto Vh = cache.Vp.middleRows(h * d, d);
    // O_h = V_h P^T, so dV_h = dO_h P and dP = dO_h^T V_h.
    dVp.middleRows(h * d, d) = dOh * P;
    Matrix<Scalar> dP = dOh.transpose() * Vh;
    Matrix<Scalar> dS = softmax_rows_backward(P, dP) * scale;
    dQp.middleRows(h * d, d) = Kh * dS.transpose();
    dKp.middleRows(h * d, d) = Qh * dS;
  }

  g.dWq = dQp * cache.queries.transpose();
  g.dWk = dKp * cache.source.transpose();
  g.dWv = dVp * cache.source.transpose();
  g.d_queries = Wq.transpose() * dQp;
  g.d_source = Wk.transpose() * dKp + Wv.transpose() * dVp;
  return g;
}

}  // namespace mvf
