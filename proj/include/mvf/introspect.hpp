#pragma once

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvf/trainer.hpp"

namespace mvf {

// Mean normalized gate weights per layer over a sample subset, the model's
// own account of which encoder it listened to for that group of samples.
struct GateReport {
  std::vector<Vector<double>> layer_means;  // L entries, each an N-simplex
  int sample_count = 0;
  std::string group_label;
};

inline void to_json(nlohmann::json& j, const GateReport& r) {
  std::vector<std::vector<double>> layers;
  for (const auto& v : r.layer_means) {
    layers.emplace_back(v.data(), v.data() + v.size());
  }
  j = nlohmann::json{{"layer_means", layers},
                     {"sample_count", r.sample_count},
                     {"group_label", r.group_label}};
}

inline void from_json(const nlohmann::json& j, GateReport& r) {
  r.layer_means.clear();
  for (const auto& row : j.at("layer_means")) {
    auto vals = row.get<std::vector<double>>();
    r.layer_means.push_back(
        Eigen::Map<const Vector<double>>(vals.data(), Eigen::Index(vals.size())));
  }
  r.sample_count = j.at("sample_count").get<int>();
  r.group_label = j.at("group_label").get<std::string>();
}

// Per-layer arithmetic mean of the gate vectors over `samples`, renormalized
// to unit sum (exact up to rounding since each trace is already a simplex).
template <typename Scalar>
GateReport aggregate_gates(const FusorState<Scalar>& state,
                           const std::vector<EncodedSample<Scalar>>& samples,
                           std::string group_label = "") {
  if (samples.empty()) {
    throw std::invalid_argument("aggregate_gates: empty sample subset");
  }
  const int L = state.config.num_layers;
  const int N = state.config.num_encoders;
  std::vector<Vector<double>> sums(L, Vector<double>::Zero(N));
  for (const auto& s : samples) {
    auto out = fusor_forward(s.views, s.text, state);
    for (int l = 0; l < L; ++l) {
      sums[size_t(l)] += out.gate_trace[size_t(l)].weights.template cast<double>();
    }
  }
  GateReport report;
  report.sample_count = int(samples.size());
  report.group_label = std::move(group_label);
  for (auto& v : sums) report.layer_means.push_back(v / v.sum());
  return report;
}

// An image series varying one attribute, embedded by some view of the model.
struct EmbeddingSeries {
  std::vector<Vector<double>> embeddings;
  std::string attribute;
};

// Mean pairwise Euclidean distance between the L2-normalized embeddings.
// Two identical directions score 0; orthogonal directions score sqrt(2).
inline double discriminability(const EmbeddingSeries& series) {
  const auto& e = series.embeddings;
  if (e.size() < 2) {
    throw std::invalid_argument("discriminability: need at least 2 embeddings");
  }
  std::vector<Vector<double>> unit;
  unit.reserve(e.size());
  for (const auto& v : e) {
    if (v.size() != e.front().size()) {
      throw std::invalid_argument("discriminability: embedding dims differ");
    }
    const double n = v.norm();
    if (n == 0.0) {
      throw std::invalid_argument("discriminability: zero embedding cannot be normalized");
    }
    unit.push_back(v / n);
  }
  double total = 0.0;
  int pairs = 0;
  for (size_t i = 0; i < unit.size(); ++i) {
    for (size_t j = i + 1; j < unit.size(); ++j) {
      total += (unit[i] - unit[j]).norm();
      ++pairs;
    }
  }
  return total / double(pairs);
}

// Embedding of one sample: mean-pooled fused output tokens.
template <typename Scalar>
Vector<double> fused_embedding(const FusorState<Scalar>& state,
                               const EncodedSample<Scalar>& sample) {
  auto out = fusor_forward(sample.views, sample.text, state);
  return Vector<Scalar>(out.tokens.rowwise().mean()).template cast<double>();
}

// Embedding of one image under a single raw encoder view: mean per channel.
template <typename Scalar>
Vector<double> encoder_embedding(const EncoderAdapter<Scalar>& encoder,
                                 const SyntheticImage& image) {
  FeatureMap<Scalar> map = encoder.encode(image);
  return Vector<Scalar>(map.values.rowwise().mean()).template cast<double>();
}

// Accuracy per instruction class with the gate forced to one encoder.
// k is 1-based; the full dataset is evaluated under mode=single_encoder(k).
template <typename Scalar>
DatasetAccuracy forced_gate_eval(const ClassifierModel<Scalar>& model,
                                 const std::vector<EncodedSample<Scalar>>& data,
                                 int k) {
  ClassifierModel<Scalar> forced = model;
  forced.fusor.config.mode = FusorMode::single_encoder;
  forced.fusor.config.single_encoder_index = k;
  forced.fusor.config.validate();
  return dataset_accuracy(forced, data);
}

}  // namespace mvf
