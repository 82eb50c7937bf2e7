#pragma once

#include <utility>
#include <vector>

#include "mvf/attention.hpp"
#include "mvf/config.hpp"
#include "mvf/interpolate.hpp"
#include "mvf/nn.hpp"
#include "mvf/state.hpp"
#include "mvf/types.hpp"

namespace mvf {

template <typename Scalar>
struct GateVector {
  Vector<Scalar> weights;  // length N, simplex
  int layer_index = 1;     // 1-based
};

template <typename Scalar>
struct FusorOutput {
  Matrix<Scalar> tokens;                      // D_out x (H*W)
  std::vector<GateVector<Scalar>> gate_trace;  // exactly L entries
  Vector<Scalar> query_attention;             // length M, simplex
  int height = 0;
  int width = 0;
};

template <typename Scalar>
Vector<Scalar> one_hot(int n, int index) {
  Vector<Scalar> v = Vector<Scalar>::Zero(n);
  v(index) = Scalar(1);
  return v;
}

// ---------------------------------------------------------------------------
// Query generation: one instruction-specific query from the bank of M
// learnable queries. Each bank entry is scored through its spatially pooled
// descriptor; the output is the attention-weighted sum of value-projected
// full bank entries.

template <typename Scalar>
struct QueryGenCache {
  Vector<Scalar> t_aligned;
  Vector<Scalar> q_score;                  // Wq * t_aligned
  std::vector<Vector<Scalar>> descriptors;  // pooled bank entries
  std::vector<Vector<Scalar>> keys;         // Wk * descriptor
  Vector<Scalar> attention;
  std::vector<Matrix<Scalar>> values;       // Wv * bank entry
};

template <typename Scalar>
struct QueryGenResult {
  Matrix<Scalar> query;      // C x HW
  Vector<Scalar> attention;  // length M
};

template <typename Scalar>
QueryGenResult<Scalar> generate_query(const Vector<Scalar>& t_aligned,
                                      const std::vector<Matrix<Scalar>>& bank,
                                      const Matrix<Scalar>& Wq,
                                      const Matrix<Scalar>& Wk,
                                      const Matrix<Scalar>& Wv,
                                      QueryGenCache<Scalar>* cache = nullptr) {
  if (bank.empty()) throw config_error("generate_query: empty query bank");
  if (t_aligned.size() != Wq.cols()) {
    throw config_error("generate_query: text embedding dim mismatch");
  }
  const int M = static_cast<int>(bank.size());
  const Eigen::Index C = Wq.rows();
  const Scalar scale = Scalar(1) / Scalar(std::sqrt(static_cast<double>(C)));

  Vector<Scalar> q = Wq * t_aligned;
  std::vector<Vector<Scalar>> descriptors(bank.size());
  std::vector<Vector<Scalar>> keys(bank.size());
  Vector<Scalar> scores(M);
  for (int m = 0; m < M; ++m) {
    descriptors[m] = bank[m].rowwise().mean();
    keys[m] = Wk * descriptors[m];
    scores(m) = q.dot(keys[m]) * scale;
  }
  Vector<Scalar> attention = softmax(scores);

  QueryGenResult<Scalar> result;
  result.query = Matrix<Scalar>::Zero(C, bank.front().cols());
  std::vector<Matrix<Scalar>> values(bank.size());
  for (int m = 0; m < M; ++m) {
    values[m] = Wv * bank[m];
    result.query += attention(m) * values[m];
  }
  result.attention = attention;

  if (cache) {
    cache->t_aligned = t_aligned;
    cache->q_score = std::move(q);
    cache->descriptors = std::move(descriptors);
    cache->keys = std::move(keys);
    cache->attention = attention;
    cache->values = std::move(values);
  }
  return result;
}

template <typename Scalar>
struct QueryGenGrads {
  Matrix<Scalar> dWq, dWk, dWv;
  std::vector<Matrix<Scalar>> d_bank;
  Vector<Scalar> d_t_aligned;
};

template <typename Scalar>
QueryGenGrads<Scalar> generate_query_backward(const Matrix<Scalar>& d_query,
                                              const QueryGenCache<Scalar>& cache,
                                              const std::vector<Matrix<Scalar>>& bank,
                                              const Matrix<Scalar>& Wq,
                                              const Matrix<Scalar>& Wk,
                                              const Matrix<Scalar>& Wv) {
  const int M = static_cast<int>(bank.size());
  const Eigen::Index C = Wq.rows();
  const Scalar scale = Scalar(1) / Scalar(std::sqrt(static_cast<double>(C)));
  const Scalar inv_hw = Scalar(1) / Scalar(bank.front().cols());

  QueryGenGrads<Scalar> g;
  g.dWq = Matrix<Scalar>::Zero(Wq.rows(), Wq.cols());
  g.dWk = Matrix<Scalar>::Zero(Wk.rows(), Wk.cols());
  g.dWv = Matrix<Scalar>::Zero(Wv.rows(), Wv.cols());
  g.d_bank.resize(bank.size());

  Vector<Scalar> d_attention(M);
  for (int m = 0; m < M; ++m) {
    Matrix<Scalar> dV = cache.attention(m) * d_query;
    g.dWv += dV * bank[m].transpose();
    g.d_bank[m] = Wv.transpose() * dV;
    d_attention(m) = (d_query.array() * cache.values[m].array()).sum();
  }

  Vector<Scalar> d_scores = softmax_backward(cache.attention, d_attention);
  Vector<Scalar> dq = Vector<Scalar>::Zero(C);
  for (int m = 0; m < M; ++m) {
    Scalar ds = d_scores(m) * scale;
    dq += ds * cache.keys[m];
    Vector<Scalar> dk = ds * cache.q_score;
    g.dWk += dk * cache.descriptors[m].transpose();
    Vector<Scalar> dd = Wk.transpose() * dk;
    // Descriptor is the spatial mean of the bank entry.
    g.d_bank[m].colwise() += (dd * inv_hw).eval().col(0);
  }
  g.dWq = dq * cache.t_aligned.transpose();
  g.d_t_aligned = Wq.transpose() * dq;
  return g;
}

// ---------------------------------------------------------------------------
// Per-encoder feature extraction: cross-attention from the query tokens into
// each canonical-shape encoder map, one projection triple per encoder, no
// output projection.

template <typename Scalar>
std::vector<FeatureMap<Scalar>> extract_features(
    const FeatureMap<Scalar>& query, const std::vector<FeatureMap<Scalar>>& xs,
    const std::vector<ExtractParams<Scalar>>& params, int heads,
    std::vector<AttentionCache<Scalar>>* caches = nullptr) {
  if (xs.size() != params.size()) {
    throw config_error("extract_features: encoder count mismatch");
  }
  if (caches) caches->resize(xs.size());
  std::vector<FeatureMap<Scalar>> out(xs.size());
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (!xs[n].same_shape(query)) {
      throw config_error("extract_features: inputs not at canonical shape");
    }
    out[n] = FeatureMap<Scalar>(query.channels, query.height, query.width);
    out[n].values = multihead_attention<Scalar>(
        query.values, xs[n].values, params[n].Wq, params[n].Wk, params[n].Wv,
        nullptr, heads, caches ? &(*caches)[n] : nullptr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gating MLP over the aligned text embedding and the pooled per-encoder
// features. Every reduction across encoders is a canonical_sum, so permuting
// encoders (with their parameter blocks) permutes the weights bit-exactly.

template <typename Scalar>
struct GateCache {
  Vector<Scalar> input;    // (N+1)C concatenation
  Vector<Scalar> pre1;
  Vector<Scalar> hidden;
  Vector<Scalar> weights;
};

template <typename Scalar>
Vector<Scalar> gate_weights(const Vector<Scalar>& t_aligned,
                            const std::vector<FeatureMap<Scalar>>& fs,
                            const GateParams<Scalar>& params,
                            GateCache<Scalar>* cache = nullptr) {
  const int N = static_cast<int>(fs.size());
  const Eigen::Index C = t_aligned.size();
  if (params.W1.cols() != (N + 1) * C || params.W2.rows() != N) {
    throw config_error("gate_weights: parameter shape mismatch");
  }

  Vector<Scalar> input((N + 1) * C);
  input.head(C) = t_aligned;
  std::vector<Vector<Scalar>> pooled(fs.size());
  for (int n = 0; n < N; ++n) {
    pooled[n] = spatial_mean(fs[n]);
    input.segment(C * (n + 1), C) = pooled[n];
  }

  const Eigen::Index hid = params.W1.rows();
  Vector<Scalar> pre1(hid);
  std::vector<Scalar> partials(static_cast<std::size_t>(N));
  for (Eigen::Index j = 0; j < hid; ++j) {
    Scalar base = params.b1(j, 0) + params.W1.row(j).head(C).dot(t_aligned);
    for (int n = 0; n < N; ++n) {
      partials[static_cast<std::size_t>(n)] =
          params.W1.row(j).segment(C * (n + 1), C).dot(pooled[n]);
    }
    pre1(j) = base + canonical_sum(partials);
  }

  Vector<Scalar> hidden = pre1.unaryExpr([](Scalar v) { return gelu(v); });
  Vector<Scalar> logits = (params.W2 * hidden) + params.b2.col(0);
  Vector<Scalar> weights = softmax_canonical(logits);

  if (cache) {
    cache->input = std::move(input);
    cache->pre1 = std::move(pre1);
    cache->hidden = std::move(hidden);
    cache->weights = weights;
  }
  return weights;
}

template <typename Scalar>
struct GateGrads {
  Matrix<Scalar> dW1, db1, dW2, db2;
  Vector<Scalar> d_t_aligned;
  std::vector<Vector<Scalar>> d_pooled;  // per encoder, C each
};

template <typename Scalar>
GateGrads<Scalar> gate_weights_backward(const Vector<Scalar>& d_weights,
                                        const GateCache<Scalar>& cache,
                                        const GateParams<Scalar>& params,
                                        int num_encoders) {
  const int N = num_encoders;
  const Eigen::Index C = cache.input.size() / (N + 1);

  GateGrads<Scalar> g;
  Vector<Scalar> dz = softmax_backward(cache.weights, d_weights);
  g.dW2 = dz * cache.hidden.transpose();
  g.db2 = dz;
  Vector<Scalar> dh = params.W2.transpose() * dz;
  Vector<Scalar> dpre =
      dh.array() * cache.pre1.unaryExpr([](Scalar v) { return gelu_grad(v); }).array();
  g.dW1 = dpre * cache.input.transpose();
  g.db1 = dpre;
  Vector<Scalar> du = params.W1.transpose() * dpre;
  g.d_t_aligned = du.head(C);
  g.d_pooled.resize(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    g.d_pooled[static_cast<std::size_t>(n)] = du.segment(C * (n + 1), C);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Convex fusion of the per-encoder maps. One-hot weights return the selected
// map verbatim; otherwise each element is a canonical_sum of the weighted
// contributions (encoder-order independent bit for bit).

template <typename Scalar>
FeatureMap<Scalar> fuse(const Vector<Scalar>& weights,
                        const std::vector<FeatureMap<Scalar>>& fs) {
  if (static_cast<std::size_t>(weights.size()) != fs.size() || fs.empty()) {
    throw std::invalid_argument("fuse: weight/feature count mismatch");
  }
  const int N = static_cast<int>(fs.size());
  for (int n = 1; n < N; ++n) {
    if (!fs[n].same_shape(fs[0])) {
      throw std::invalid_argument("fuse: feature shapes differ");
    }
  }

  int hot = -1;
  bool one_hot_weights = true;
  for (int n = 0; n < N && one_hot_weights; ++n) {
    if (weights(n) == Scalar(1) && hot < 0) {
      hot = n;
    } else if (weights(n) != Scalar(0)) {
      one_hot_weights = false;
    }
  }
  if (one_hot_weights && hot >= 0) return fs[hot];

  FeatureMap<Scalar> out(fs[0].channels, fs[0].height, fs[0].width);
  std::vector<Scalar> terms(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    for (int n = 0; n < N; ++n) {
      terms[static_cast<std::size_t>(n)] = weights(n) * fs[n].values(i);
    }
    out.values(i) = canonical_sum(terms);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pre-norm transformer block over the fused map's H*W tokens. With Wo, Wff2
// and bff2 zero (their initialization), the block is the identity.

template <typename Scalar>
struct BlockCache {
  Matrix<Scalar> x;
  LayerNormCache<Scalar> ln1;
  Matrix<Scalar> u;
  AttentionCache<Scalar> attn;
  Matrix<Scalar> y;
  LayerNormCache<Scalar> ln2;
  Matrix<Scalar> v;
  Matrix<Scalar> ff_pre;
  Matrix<Scalar> ff_act;
};

template <typename Scalar>
Matrix<Scalar> block_forward(const Matrix<Scalar>& x, const BlockParams<Scalar>& p,
                             int heads, BlockCache<Scalar>* cache = nullptr) {
  LayerNormCache<Scalar> ln1_cache;
  Matrix<Scalar> u = layernorm<Scalar>(x, p.ln1_gamma.col(0), p.ln1_beta.col(0),
                                       cache ? &ln1_cache : nullptr);
  AttentionCache<Scalar> attn_cache;
  Matrix<Scalar> a = multihead_attention<Scalar>(u, u, p.Wq, p.Wk, p.Wv, &p.Wo,
                                                 heads, cache ? &attn_cache : nullptr);
  Matrix<Scalar> y = x + a;

  LayerNormCache<Scalar> ln2_cache;
  Matrix<Scalar> v = layernorm<Scalar>(y, p.ln2_gamma.col(0), p.ln2_beta.col(0),
                                       cache ? &ln2_cache : nullptr);
  Matrix<Scalar> ff_pre = (p.Wff1 * v).colwise() + p.bff1.col(0);
  Matrix<Scalar> ff_act = gelu(ff_pre);
  Matrix<Scalar> out = y + ((p.Wff2 * ff_act).colwise() + p.bff2.col(0));

  if (cache) {
    cache->x = x;
    cache->ln1 = std::move(ln1_cache);
    cache->u = std::move(u);
    cache->attn = std::move(attn_cache);
    cache->y = std::move(y);
    cache->ln2 = std::move(ln2_cache);
    cache->v = std::move(v);
    cache->ff_pre = std::move(ff_pre);
    cache->ff_act = std::move(ff_act);
  }
  return out;
}

template <typename Scalar>
struct BlockGrads {
  BlockParams<Scalar> params;
  Matrix<Scalar> d_x;
};

template <typename Scalar>
BlockGrads<Scalar> block_backward(const Matrix<Scalar>& d_out,
                                  const BlockCache<Scalar>& cache,
                                  const BlockParams<Scalar>& p, int heads) {
  BlockGrads<Scalar> g;

  // Feedforward sublayer.
  g.params.Wff2 = d_out * cache.ff_act.transpose();
  g.params.bff2 = d_out.rowwise().sum();
  Matrix<Scalar> d_act = p.Wff2.transpose() * d_out;
  Matrix<Scalar> d_pre = d_act.array() * gelu_grad(cache.ff_pre).array();
  g.params.Wff1 = d_pre * cache.v.transpose();
  g.params.bff1 = d_pre.rowwise().sum();
  Matrix<Scalar> d_v = p.Wff1.transpose() * d_pre;

  LayerNormGrads<Scalar> ln2 =
      layernorm_backward<Scalar>(d_v, cache.ln2, p.ln2_gamma.col(0));
  g.params.ln2_gamma = ln2.d_gamma;
  g.params.ln2_beta = ln2.d_beta;
  Matrix<Scalar> d_y = d_out + ln2.d_input;

  // Attention sublayer; queries and source are the same normalized tokens.
  AttentionGrads<Scalar> attn = multihead_attention_backward<Scalar>(
      d_y, cache.attn, p.Wq, p.Wk, p.Wv, &p.Wo, heads);
  g.params.Wq = attn.dWq;
  g.params.Wk = attn.dWk;
  g.params.Wv = attn.dWv;
  g.params.Wo = attn.dWo;
  Matrix<Scalar> d_u = attn.d_queries + attn.d_source;

  LayerNormGrads<Scalar> ln1 =
      layernorm_backward<Scalar>(d_u, cache.ln1, p.ln1_gamma.col(0));
  g.params.ln1_gamma = ln1.d_gamma;
  g.params.ln1_beta = ln1.d_beta;
  g.d_x = d_y + ln1.d_input;
  return g;
}

// ---------------------------------------------------------------------------
// Full fusor.

template <typename Scalar>
struct FusorCache {
  FusorConfig config;
  std::vector<FeatureMap<Scalar>> native;     // raw inputs
  std::vector<FeatureMap<Scalar>> projected;  // after 1x1 projection, native spatial
  std::vector<FeatureMap<Scalar>> canonical;  // X_n^*
  Vector<Scalar> text;
  Vector<Scalar> t_aligned;
  QueryGenCache<Scalar> qgen;
  struct LayerCache {
    Matrix<Scalar> query_in;  // C x HW input to this layer
    std::vector<AttentionCache<Scalar>> extract;
    std::vector<FeatureMap<Scalar>> extracted;
    GateCache<Scalar> gate;
    Vector<Scalar> weights;
    FeatureMap<Scalar> fused;
    BlockCache<Scalar> block;
  };
  std::vector<LayerCache> layers;
  Matrix<Scalar> final_query;  // C x HW (or canonical encoder-1 map in baseline)
  Matrix<Scalar> out_pre;
  Matrix<Scalar> out_act;
};

namespace detail {

// 1x1 channel projection (if configured) followed by spatial interpolation.
template <typename Scalar>
FeatureMap<Scalar> to_canonical(const FeatureMap<Scalar>& native,
                                const Matrix<Scalar>& input_proj,
                                const FusorConfig& config,
                                FeatureMap<Scalar>* projected_out) {
  FeatureMap<Scalar> projected = native;
  if (input_proj.size() != 0) {
    projected = FeatureMap<Scalar>(config.channels, native.height, native.width);
    projected.values = input_proj * native.values;
  } else if (native.channels != config.channels) {
    throw config_error("fusor_forward: encoder channels differ from canonical "
                       "and no input projection is configured");
  }
  if (projected_out) *projected_out = projected;
  return interpolate_bilinear(projected, config.height, config.width);
}

template <typename Scalar>
Matrix<Scalar> out_proj_forward(const Matrix<Scalar>& q, const FusorState<Scalar>& state,
                                Matrix<Scalar>* pre_out, Matrix<Scalar>* act_out) {
  Matrix<Scalar> pre = (state.out_W1 * q).colwise() + state.out_b1.col(0);
  Matrix<Scalar> act = gelu(pre);
  Matrix<Scalar> tokens = (state.out_W2 * act).colwise() + state.out_b2.col(0);
  if (pre_out) *pre_out = std::move(pre);
  if (act_out) *act_out = std::move(act);
  return tokens;
}

}  // namespace detail

template <typename Scalar>
FusorOutput<Scalar> fusor_forward(const std::vector<FeatureMap<Scalar>>& inputs,
                                  const Vector<Scalar>& text,
                                  const FusorState<Scalar>& state,
                                  FusorCache<Scalar>* cache = nullptr) {
  const FusorConfig& config = state.config;
  const int N = config.num_encoders;
  const int L = config.num_layers;
  if (static_cast<int>(inputs.size()) != N) {
    throw std::invalid_argument("fusor_forward: expected exactly N inputs");
  }
  if (text.size() != config.text_dim) {
    throw config_error("fusor_forward: text embedding dim mismatch");
  }

  if (cache) {
    cache->config = config;
    cache->native = inputs;
    cache->projected.resize(inputs.size());
    cache->layers.clear();
    cache->text = text;
  }

  std::vector<FeatureMap<Scalar>> canonical(inputs.size());
  for (int n = 0; n < N; ++n) {
    canonical[n] = detail::to_canonical<Scalar>(
        inputs[n], state.input_proj[n], config,
        cache ? &cache->projected[n] : nullptr);
  }
  if (cache) cache->canonical = canonical;

  FusorOutput<Scalar> output;
  output.height = config.height;
  output.width = config.width;

  if (config.mode == FusorMode::baseline_no_fusor) {
    // Fusion bypass: the first encoder's canonical map goes straight to the
    // projector. The trace records the pass-through as one-hot on encoder 1
    // and a uniform query attention, keeping output invariants intact.
    output.tokens = detail::out_proj_forward<Scalar>(
        canonical[0].values, state, cache ? &cache->out_pre : nullptr,
        cache ? &cache->out_act : nullptr);
    output.gate_trace.reserve(L);
    for (int l = 0; l < L; ++l) {
      output.gate_trace.push_back({one_hot<Scalar>(N, 0), l + 1});
    }
    output.query_attention =
        Vector<Scalar>::Constant(config.num_queries,
                                 Scalar(1) / Scalar(config.num_queries));
    if (cache) cache->final_query = canonical[0].values;
    return output;
  }

  Vector<Scalar> t_aligned = state.text_align * text;
  if (cache) cache->t_aligned = t_aligned;

  QueryGenResult<Scalar> qgen = generate_query<Scalar>(
      t_aligned, state.query_bank, state.qgen_Wq, state.qgen_Wk, state.qgen_Wv,
      cache ? &cache->qgen : nullptr);
  output.query_attention = qgen.attention;

  FeatureMap<Scalar> query(config.channels, config.height, config.width);
  query.values = std::move(qgen.query);

  if (cache) cache->layers.resize(static_cast<std::size_t>(L));
  output.gate_trace.reserve(L);
  for (int l = 0; l < L; ++l) {
    auto* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
    if (lc) lc->query_in = query.values;

    std::vector<AttentionCache<Scalar>> extract_caches;
    std::vector<FeatureMap<Scalar>> extracted = extract_features<Scalar>(
        query, canonical, state.layers[static_cast<std::size_t>(l)].extract,
        config.heads, lc ? &extract_caches : nullptr);

    Vector<Scalar> weights;
    if (config.mode == FusorMode::single_encoder) {
      weights = one_hot<Scalar>(N, config.single_encoder_index - 1);
    } else {
      weights = gate_weights<Scalar>(
          t_aligned, extracted, state.layers[static_cast<std::size_t>(l)].gate,
          lc ? &lc->gate : nullptr);
    }
    output.gate_trace.push_back({weights, l + 1});

    FeatureMap<Scalar> fused = fuse<Scalar>(weights, extracted);
    Matrix<Scalar> next = block_forward<Scalar>(
        fused.values, state.layers[static_cast<std::size_t>(l)].block,
        config.heads, lc ? &lc->block : nullptr);

    if (lc) {
      lc->extract = std::move(extract_caches);
      lc->extracted = std::move(extracted);
      lc->weights = weights;
      lc->fused = std::move(fused);
    }
    query.values = std::move(next);
  }

  output.tokens = detail::out_proj_forward<Scalar>(
      query.values, state, cache ? &cache->out_pre : nullptr,
      cache ? &cache->out_act : nullptr);
  if (cache) cache->final_query = query.values;
  return output;
}

template <typename Scalar>
struct FusorGrads {
  FusorState<Scalar> params;                 // gradient per parameter tensor
  std::vector<FeatureMap<Scalar>> d_inputs;  // per encoder, native shape
  Vector<Scalar> d_text;
};

template <typename Scalar>
FusorGrads<Scalar> fusor_backward(const Matrix<Scalar>& d_tokens,
                                  const FusorCache<Scalar>& cache,
                                  const FusorState<Scalar>& state) {
  const FusorConfig& config = cache.config;
  const int N = config.num_encoders;
  const int L = config.num_layers;

  FusorGrads<Scalar> grads;
  grads.params = zero_like(state);
  grads.d_text = Vector<Scalar>::Zero(config.text_dim);
  grads.d_inputs.resize(cache.native.size());

  // Projector head.
  Matrix<Scalar> d_act = state.out_W2.transpose() * d_tokens;
  grads.params.out_W2 = d_tokens * cache.out_act.transpose();
  grads.params.out_b2 = d_tokens.rowwise().sum();
  Matrix<Scalar> d_pre = d_act.array() * gelu_grad(cache.out_pre).array();
  grads.params.out_W1 = d_pre * cache.final_query.transpose();
  grads.params.out_b1 = d_pre.rowwise().sum();
  Matrix<Scalar> d_query = state.out_W1.transpose() * d_pre;

  // Gradients w.r.t. each canonical map, accumulated across layers.
  std::vector<Matrix<Scalar>> d_canonical(cache.native.size());
  for (std::size_t n = 0; n < d_canonical.size(); ++n) {
    d_canonical[n] =
        Matrix<Scalar>::Zero(config.channels, config.positions());
  }

  Vector<Scalar> d_t_aligned = Vector<Scalar>::Zero(config.channels);

  if (config.mode == FusorMode::baseline_no_fusor) {
    d_canonical[0] = d_query;
  } else {
    for (int l = L - 1; l >= 0; --l) {
      const auto& lc = cache.layers[static_cast<std::size_t>(l)];
      const auto& layer_params = state.layers[static_cast<std::size_t>(l)];
      auto& layer_grads = grads.params.layers[static_cast<std::size_t>(l)];

      BlockGrads<Scalar> bg = block_backward<Scalar>(
          d_query, lc.block, layer_params.block, config.heads);
      layer_grads.block = std::move(bg.params);
      Matrix<Scalar> d_fused = std::move(bg.d_x);

      // fuse: out = sum_n w_n F_n.
      Vector<Scalar> d_weights(N);
      std::vector<Matrix<Scalar>> d_extracted(static_cast<std::size_t>(N));
      for (int n = 0; n < N; ++n) {
        const auto& Fn = lc.extracted[static_cast<std::size_t>(n)];
        d_weights(n) = (d_fused.array() * Fn.values.array()).sum();
        d_extracted[static_cast<std::size_t>(n)] = lc.weights(n) * d_fused;
      }

      if (config.mode == FusorMode::full) {
        GateGrads<Scalar> gg = gate_weights_backward<Scalar>(
            d_weights, lc.gate, layer_params.gate, N);
        layer_grads.gate.W1 = std::move(gg.dW1);
        layer_grads.gate.b1 = std::move(gg.db1);
        layer_grads.gate.W2 = std::move(gg.dW2);
        layer_grads.gate.b2 = std::move(gg.db2);
        d_t_aligned += gg.d_t_aligned;
        const Scalar inv_hw = Scalar(1) / Scalar(config.positions());
        for (int n = 0; n < N; ++n) {
          d_extracted[static_cast<std::size_t>(n)].colwise() +=
              (gg.d_pooled[static_cast<std::size_t>(n)] * inv_hw).eval().col(0);
        }
      }
      // single_encoder mode: weights are constants, no gate gradient.

      Matrix<Scalar> d_query_prev =
          Matrix<Scalar>::Zero(config.channels, config.positions());
      for (int n = 0; n < N; ++n) {
        const auto& ep = layer_params.extract[static_cast<std::size_t>(n)];
        AttentionGrads<Scalar> ag = multihead_attention_backward<Scalar>(
            d_extracted[static_cast<std::size_t>(n)],
            lc.extract[static_cast<std::size_t>(n)], ep.Wq, ep.Wk, ep.Wv,
            nullptr, config.heads);
        auto& eg = layer_grads.extract[static_cast<std::size_t>(n)];
        eg.Wq = std::move(ag.dWq);
        eg.Wk = std::move(ag.dWk);
        eg.Wv = std::move(ag.dWv);
        d_query_prev += ag.d_queries;
        d_canonical[static_cast<std::size_t>(n)] += ag.d_source;
      }
      d_query = std::move(d_query_prev);
    }

    // Query generation.
    QueryGenGrads<Scalar> qg = generate_query_backward<Scalar>(
        d_query, cache.qgen, state.query_bank, state.qgen_Wq, state.qgen_Wk,
        state.qgen_Wv);
    for (std::size_t m = 0; m < state.query_bank.size(); ++m) {
      grads.params.query_bank[m] = std::move(qg.d_bank[m]);
    }
    grads.params.qgen_Wq = std::move(qg.dWq);
    grads.params.qgen_Wk = std::move(qg.dWk);
    grads.params.qgen_Wv = std::move(qg.dWv);
    d_t_aligned += qg.d_t_aligned;

    grads.params.text_align = d_t_aligned * cache.text.transpose();
    grads.d_text = state.text_align.transpose() * d_t_aligned;
  }

  // Canonical-map gradients back through interpolation and the channel
  // projections to the native inputs.
  for (std::size_t n = 0; n < cache.native.size(); ++n) {
    FeatureMap<Scalar> d_canon_map(config.channels, config.height, config.width);
    d_canon_map.values = std::move(d_canonical[n]);
    FeatureMap<Scalar> d_projected = interpolate_bilinear_adjoint<Scalar>(
        d_canon_map, cache.native[n].height, cache.native[n].width);
    if (state.input_proj[n].size() != 0) {
      grads.params.input_proj[n] =
          d_projected.values * cache.native[n].values.transpose();
      grads.d_inputs[n] = FeatureMap<Scalar>(cache.native[n].channels,
                                             cache.native[n].height,
                                             cache.native[n].width);
      grads.d_inputs[n].values =
          state.input_proj[n].transpose() * d_projected.values;
    } else {
      grads.d_inputs[n] = std::move(d_projected);
    }
  }
  return grads;
}

}  // namespace mvf
