#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvf/config.hpp"
#include "mvf/types.hpp"

namespace mvf {

// Parameters are stored uniformly as dynamic matrices; vectors are n x 1.
// Query bank entries are C x (H*W), matching FeatureMap storage.

template <typename Scalar>
struct ExtractParams {
  Matrix<Scalar> Wq, Wk, Wv;  // C x C, per encoder
};

template <typename Scalar>
struct GateParams {
  Matrix<Scalar> W1, b1;  // gate_hidden x (N+1)C, gate_hidden x 1
  Matrix<Scalar> W2, b2;  // N x gate_hidden, N x 1
};

template <typename Scalar>
struct BlockParams {
  Matrix<Scalar> Wq, Wk, Wv, Wo;          // C x C
  Matrix<Scalar> ln1_gamma, ln1_beta;     // C x 1
  Matrix<Scalar> ln2_gamma, ln2_beta;     // C x 1
  Matrix<Scalar> Wff1, bff1;              // 4C x C, 4C x 1
  Matrix<Scalar> Wff2, bff2;              // C x 4C, C x 1
};

template <typename Scalar>
struct LayerParams {
  std::vector<ExtractParams<Scalar>> extract;  // one per encoder
  GateParams<Scalar> gate;
  BlockParams<Scalar> block;
};

template <typename Scalar>
struct FusorState {
  FusorConfig config;
  std::vector<Matrix<Scalar>> query_bank;  // M entries, C x HW
  Matrix<Scalar> qgen_Wq, qgen_Wk, qgen_Wv;  // C x C
  Matrix<Scalar> text_align;                 // C x D_t
  // 1x1 channel projections, sized C x C_n; empty for encoders already at C.
  std::vector<Matrix<Scalar>> input_proj;
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> out_W1, out_b1;  // D_out x C, D_out x 1
  Matrix<Scalar> out_W2, out_b2;  // D_out x D_out, D_out x 1
};

template <typename Scalar>
struct TensorRef {
  std::string name;
  std::string group;
  Matrix<Scalar>* tensor;
};

// Canonical parameter enumeration. Initialization, checkpointing, the
// optimizer, and the gradient checker all rely on this fixed order.
template <typename Scalar>
std::vector<TensorRef<Scalar>> tensor_refs(FusorState<Scalar>& state) {
  std::vector<TensorRef<Scalar>> refs;
  auto add = [&refs](const std::string& name, const std::string& group,
                     Matrix<Scalar>& tensor) {
    refs.push_back({name, group, &tensor});
  };

  for (std::size_t m = 0; m < state.query_bank.size(); ++m) {
    add("query_bank." + std::to_string(m), "query_bank", state.query_bank[m]);
  }
  add("qgen.Wq", "qgen_proj", state.qgen_Wq);
  add("qgen.Wk", "qgen_proj", state.qgen_Wk);
  add("qgen.Wv", "qgen_proj", state.qgen_Wv);
  add("text_align", "text_align", state.text_align);
  for (std::size_t n = 0; n < state.input_proj.size(); ++n) {
    if (state.input_proj[n].size() == 0) continue;
    add("input_proj." + std::to_string(n), "input_proj", state.input_proj[n]);
  }
  for (std::size_t l = 0; l < state.layers.size(); ++l) {
    const std::string lp = "layers." + std::to_string(l) + ".";
    LayerParams<Scalar>& layer = state.layers[l];
    for (std::size_t n = 0; n < layer.extract.size(); ++n) {
      const std::string ep = lp + "extract." + std::to_string(n) + ".";
      add(ep + "Wq", "extract_proj", layer.extract[n].Wq);
      add(ep + "Wk", "extract_proj", layer.extract[n].Wk);
      add(ep + "Wv", "extract_proj", layer.extract[n].Wv);
    }
    add(lp + "gate.W1", "gate_mlp", layer.gate.W1);
    add(lp + "gate.b1", "gate_mlp", layer.gate.b1);
    add(lp + "gate.W2", "gate_mlp", layer.gate.W2);
    add(lp + "gate.b2", "gate_mlp", layer.gate.b2);
    add(lp + "block.Wq", "block", layer.block.Wq);
    add(lp + "block.Wk", "block", layer.block.Wk);
    add(lp + "block.Wv", "block", layer.block.Wv);
    add(lp + "block.Wo", "block", layer.block.Wo);
    add(lp + "block.ln1_gamma", "block", layer.block.ln1_gamma);
    add(lp + "block.ln1_beta", "block", layer.block.ln1_beta);
    add(lp + "block.ln2_gamma", "block", layer.block.ln2_gamma);
    add(lp + "block.ln2_beta", "block", layer.block.ln2_beta);
    add(lp + "block.Wff1", "block", layer.block.Wff1);
    add(lp + "block.bff1", "block", layer.block.bff1);
    add(lp + "block.Wff2", "block", layer.block.Wff2);
    add(lp + "block.bff2", "block", layer.block.bff2);
  }
  add("out_proj.W1", "out_proj", state.out_W1);
  add("out_proj.b1", "out_proj", state.out_b1);
  add("out_proj.W2", "out_proj", state.out_W2);
  add("out_proj.b2", "out_proj", state.out_b2);
  return refs;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> uniform_fan_in(int rows, int cols, std::mt19937_64& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix<Scalar> out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = Scalar(dist(rng));
  }
  return out;
}

}  // namespace detail

// Deterministic initialization from config.seed. Attention and MLP weights
// use symmetric uniform fan-in; block and output-projection sublayers plus
// the gating MLP's final layer start at zero (identity block, uniform gates);
// norms start at gamma=1, beta=0; biases at zero.
template <typename Scalar>
FusorState<Scalar> init_state(const FusorConfig& config) {
  config.validate();
  FusorState<Scalar> state;
  state.config = config;
  const int C = config.channels;
  const int HW = config.positions();
  const int N = config.num_encoders;
  std::mt19937_64 rng(config.seed);

  state.query_bank.resize(config.num_queries);
  for (auto& q : state.query_bank) {
    q = detail::uniform_fan_in<Scalar>(C, HW, rng);
  }
  state.qgen_Wq = detail::uniform_fan_in<Scalar>(C, C, rng);
  state.qgen_Wk = detail::uniform_fan_in<Scalar>(C, C, rng);
  state.qgen_Wv = detail::uniform_fan_in<Scalar>(C, C, rng);
  state.text_align = detail::uniform_fan_in<Scalar>(C, config.text_dim, rng);

  state.input_proj.resize(N);
  for (int n = 0; n < N; ++n) {
    const int cn = config.encoder_native_channels(n);
    if (cn != C) {
      state.input_proj[n] = detail::uniform_fan_in<Scalar>(C, cn, rng);
    }
  }

  state.layers.resize(config.num_layers);
  const int ff = 4 * C;
  for (auto& layer : state.layers) {
    layer.extract.resize(N);
    for (auto& e : layer.extract) {
      e.Wq = detail::uniform_fan_in<Scalar>(C, C, rng);
      e.Wk = detail::uniform_fan_in<Scalar>(C, C, rng);
      e.Wv = detail::uniform_fan_in<Scalar>(C, C, rng);
    }
    layer.gate.W1 =
        detail::uniform_fan_in<Scalar>(config.gate_hidden, (N + 1) * C, rng);
    layer.gate.b1 = Matrix<Scalar>::Zero(config.gate_hidden, 1);
    layer.gate.W2 = Matrix<Scalar>::Zero(N, config.gate_hidden);
    layer.gate.b2 = Matrix<Scalar>::Zero(N, 1);
    layer.block.Wq = detail::uniform_fan_in<Scalar>(C, C, rng);
    layer.block.Wk = detail::uniform_fan_in<Scalar>(C, C, rng);
    layer.block.Wv = detail::uniform_fan_in<Scalar>(C, C, rng);
    layer.block.Wo = Matrix<Scalar>::Zero(C, C);
    layer.block.ln1_gamma = Matrix<Scalar>::Ones(C, 1);
    layer.block.ln1_beta = Matrix<Scalar>::Zero(C, 1);
    layer.block.ln2_gamma = Matrix<Scalar>::Ones(C, 1);
    layer.block.ln2_beta = Matrix<Scalar>::Zero(C, 1);
    layer.block.Wff1 = detail::uniform_fan_in<Scalar>(ff, C, rng);
    layer.block.bff1 = Matrix<Scalar>::Zero(ff, 1);
    layer.block.Wff2 = Matrix<Scalar>::Zero(C, ff);
    layer.block.bff2 = Matrix<Scalar>::Zero(C, 1);
  }

  state.out_W1 = detail::uniform_fan_in<Scalar>(config.out_dim, C, rng);
  state.out_b1 = Matrix<Scalar>::Zero(config.out_dim, 1);
  state.out_W2 = detail::uniform_fan_in<Scalar>(config.out_dim, config.out_dim, rng);
  state.out_b2 = Matrix<Scalar>::Zero(config.out_dim, 1);
  return state;
}

// Same structure as `state` with every tensor zeroed; used for gradients and
// optimizer moments.
template <typename Scalar>
FusorState<Scalar> zero_like(const FusorState<Scalar>& state) {
  FusorState<Scalar> zero = state;
  for (auto& ref : tensor_refs(zero)) ref.tensor->setZero();
  return zero;
}

template <typename To, typename From>
FusorState<To> state_cast(const FusorState<From>& state) {
  FusorState<To> out;
  out.config = state.config;
  out.query_bank.resize(state.query_bank.size());
  out.input_proj.resize(state.input_proj.size());
  for (std::size_t n = 0; n < state.input_proj.size(); ++n) {
    // Pre-size so the projection shows up in the destination enumeration.
    out.input_proj[n].resize(state.input_proj[n].rows(),
                             state.input_proj[n].cols());
  }
  out.layers.resize(state.layers.size());
  for (auto& layer : out.layers) {
    layer.extract.resize(state.layers.front().extract.size());
  }
  auto dst = tensor_refs(out);
  auto src = tensor_refs(const_cast<FusorState<From>&>(state));
  if (dst.size() != src.size()) {
    throw config_error("state_cast: tensor lists disagree");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    *dst[i].tensor = src[i].tensor->template cast<To>();
  }
  return out;
}

}  // namespace mvf
