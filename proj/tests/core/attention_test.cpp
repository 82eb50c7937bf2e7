#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mvf/attention.hpp"
#include "../test_util.hpp"

using namespace mvf;

namespace {

// Independent plain-loop reimplementation of multi-head attention on
// std::vector<double>, used as the oracle.
std::vector<std::vector<double>> oracle_attention(
    const Matrix<double>& queries, const Matrix<double>& source,
    const Matrix<double>& Wq, const Matrix<double>& Wk, const Matrix<double>& Wv,
    const Matrix<double>* Wo, int heads) {
  const int C = static_cast<int>(Wq.rows());
  const int Sq = static_cast<int>(queries.cols());
  const int Skv = static_cast<int>(source.cols());
  const int d = C / heads;

  auto project = [&](const Matrix<double>& W, const Matrix<double>& X) {
    std::vector<std::vector<double>> out(C, std::vector<double>(X.cols(), 0.0));
    for (int r = 0; r < C; ++r) {
      for (int s = 0; s < X.cols(); ++s) {
        double acc = 0.0;
        for (int k = 0; k < W.cols(); ++k) acc += W(r, k) * X(k, s);
        out[r][s] = acc;
      }
    }
    return out;
  };
  auto Q = project(Wq, queries);
  auto K = project(Wk, source);
  auto V = project(Wv, source);

  std::vector<std::vector<double>> concat(C, std::vector<double>(Sq, 0.0));
  for (int h = 0; h < heads; ++h) {
    for (int q = 0; q < Sq; ++q) {
      std::vector<double> scores(Skv, 0.0);
      for (int s = 0; s < Skv; ++s) {
        double acc = 0.0;
        for (int r = h * d; r < (h + 1) * d; ++r) acc += Q[r][q] * K[r][s];
        scores[s] = acc / std::sqrt(static_cast<double>(d));
      }
      double mx = scores[0];
      for (double v : scores) mx = std::max(mx, v);
      double denom = 0.0;
      for (double& v : scores) {
        v = std::exp(v - mx);
        denom += v;
      }
      for (int r = h * d; r < (h + 1) * d; ++r) {
        double acc = 0.0;
        for (int s = 0; s < Skv; ++s) acc += V[r][s] * scores[s] / denom;
        concat[r][q] = acc;
      }
    }
  }
  if (!Wo) return concat;
  std::vector<std::vector<double>> out(C, std::vector<double>(Sq, 0.0));
  for (int r = 0; r < C; ++r) {
    for (int q = 0; q < Sq; ++q) {
      double acc = 0.0;
      for (int k = 0; k < C; ++k) acc += (*Wo)(r, k) * concat[k][q];
      out[r][q] = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("single-token attention returns the value projection of the lone key") {
  std::mt19937_64 rng(31);
  Matrix<double> Wq = testutil::random_matrix<double>(2, 2, rng);
  Matrix<double> Wk = testutil::random_matrix<double>(2, 2, rng);
  Matrix<double> Wv = testutil::random_matrix<double>(2, 2, rng);
  Matrix<double> q = testutil::random_matrix<double>(2, 1, rng);
  Matrix<double> src = testutil::random_matrix<double>(2, 1, rng);
  Matrix<double> out = multihead_attention<double>(q, src, Wq, Wk, Wv, nullptr, 1);
  Matrix<double> expected = Wv * src;
  CHECK(testutil::max_abs_diff(out, expected) < 1e-15);
}

TEST_CASE("attention over a spatially constant source is that value's projection") {
  std::mt19937_64 rng(32);
  Matrix<double> Wq = testutil::random_matrix<double>(4, 4, rng);
  Matrix<double> Wk = testutil::random_matrix<double>(4, 4, rng);
  Matrix<double> Wv = testutil::random_matrix<double>(4, 4, rng);
  Matrix<double> q = testutil::random_matrix<double>(4, 6, rng);
  Vector<double> v = testutil::random_vector<double>(4, rng);
  Matrix<double> src = v.replicate(1, 6);
  Matrix<double> out = multihead_attention<double>(q, src, Wq, Wk, Wv, nullptr, 2);
  Matrix<double> expected = (Wv * v).replicate(1, 6);
  CHECK(testutil::max_abs_diff(out, expected) < 1e-12);
}

TEST_CASE("attention matches the plain-loop oracle") {
  std::mt19937_64 rng(33);
  struct Case {
    int C, Sq, Skv, heads;
    bool with_wo;
  };
  for (Case cs : {Case{2, 2, 2, 1, false}, Case{4, 3, 5, 2, true},
                  Case{6, 4, 4, 3, true}, Case{4, 1, 7, 4, false}}) {
    Matrix<double> Wq = testutil::random_matrix<double>(cs.C, cs.C, rng);
    Matrix<double> Wk = testutil::random_matrix<double>(cs.C, cs.C, rng);
    Matrix<double> Wv = testutil::random_matrix<double>(cs.C, cs.C, rng);
    Matrix<double> Wo = testutil::random_matrix<double>(cs.C, cs.C, rng);
    Matrix<double> q = testutil::random_matrix<double>(cs.C, cs.Sq, rng);
    Matrix<double> src = testutil::random_matrix<double>(cs.C, cs.Skv, rng);
    Matrix<double> out = multihead_attention<double>(
        q, src, Wq, Wk, Wv, cs.with_wo ? &Wo : nullptr, cs.heads);
    auto expected =
        oracle_attention(q, src, Wq, Wk, Wv, cs.with_wo ? &Wo : nullptr, cs.heads);
    for (int r = 0; r < cs.C; ++r) {
      for (int c = 0; c < cs.Sq; ++c) {
        CHECK(out(r, c) == doctest::Approx(expected[r][c]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("attention backward matches finite differences") {
  std::mt19937_64 rng(34);
  const int C = 4, Sq = 3, Skv = 2, heads = 2;
  Matrix<double> Wq = testutil::random_matrix<double>(C, C, rng);
  Matrix<double> Wk = testutil::random_matrix<double>(C, C, rng);
  Matrix<double> Wv = testutil::random_matrix<double>(C, C, rng);
  Matrix<double> Wo = testutil::random_matrix<double>(C, C, rng);
  Matrix<double> q = testutil::random_matrix<double>(C, Sq, rng);
  Matrix<double> src = testutil::random_matrix<double>(C, Skv, rng);
  Matrix<double> d_out = testutil::random_matrix<double>(C, Sq, rng);

  AttentionCache<double> cache;
  multihead_attention<double>(q, src, Wq, Wk, Wv, &Wo, heads, &cache);
  AttentionGrads<double> g =
      multihead_attention_backward<double>(d_out, cache, Wq, Wk, Wv, &Wo, heads);

  auto loss = [&]() {
    return (multihead_attention<double>(q, src, Wq, Wk, Wv, &Wo, heads).array() *
            d_out.array())
        .sum();
  };
  const double h = 1e-6;
  auto check_tensor = [&](Matrix<double>& param, const Matrix<double>& grad) {
    for (int i = 0; i < param.size(); ++i) {
      double saved = param(i);
      param(i) = saved + h;
      double plus = loss();
      param(i) = saved - h;
      double minus = loss();
      param(i) = saved;
      CHECK(grad(i) == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-5));
    }
  };
  check_tensor(Wq, g.dWq);
  check_tensor(Wk, g.dWk);
  check_tensor(Wv, g.dWv);
  check_tensor(Wo, g.dWo);
  check_tensor(q, g.d_queries);
  check_tensor(src, g.d_source);
}
