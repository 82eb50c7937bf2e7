#pragma once

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvf/adapters.hpp"
#include "mvf/fusor.hpp"
#include "mvf/task.hpp"

namespace mvf {

// Fusor plus a linear classification head over mean-pooled output tokens.
template <typename Scalar>
struct ClassifierModel {
  FusorState<Scalar> fusor;
  Matrix<Scalar> head_W;  // K x D_out
  Vector<Scalar> head_b;  // K

  int num_classes() const { return int(head_W.rows()); }
};

// Head starts at zero: the first forward emits uniform logits, so the
// initial loss is exactly ln(K).
template <typename Scalar>
ClassifierModel<Scalar> make_classifier(const FusorConfig& config, int num_classes) {
  if (num_classes < 2) throw config_error("make_classifier: need at least 2 classes");
  ClassifierModel<Scalar> model;
  model.fusor = init_state<Scalar>(config);
  model.head_W = Matrix<Scalar>::Zero(num_classes, config.out_dim);
  model.head_b = Vector<Scalar>::Zero(num_classes);
  return model;
}

template <typename Scalar>
struct EncodedSample {
  std::vector<FeatureMap<Scalar>> views;
  Vector<Scalar> text;
  int label = 0;
  int class_id = 0;
};

// Encoders and the text embedder are frozen, so their outputs are computed
// once up front.
template <typename Scalar>
std::vector<EncodedSample<Scalar>> encode_dataset(
    const RoutingDataset& dataset,
    const std::vector<EncoderAdapter<Scalar>>& encoders,
    const TextEncoderAdapter<Scalar>& text_encoder) {
  std::vector<EncodedSample<Scalar>> out;
  out.reserve(dataset.samples.size());
  for (const auto& sample : dataset.samples) {
    EncodedSample<Scalar> enc;
    enc.views.reserve(encoders.size());
    for (const auto& encoder : encoders) enc.views.push_back(encoder.encode(sample.image));
    enc.text = text_encoder.embed(sample.instruction);
    enc.label = sample.label;
    enc.class_id = sample.class_id;
    out.push_back(std::move(enc));
  }
  return out;
}

struct TrainConfig {
  std::string optimizer = "adam";  // "adam" or "sgd"
  double lr = 3e-4;
  double weight_decay = 0.01;  // decoupled, applied after the optimizer step
  int batch_size = 32;
  int steps = 2000;
  std::uint64_t seed = 42;
  std::string metrics_path;  // when set, one JSON object per step is appended

  void validate() const {
    if (optimizer != "adam" && optimizer != "sgd") {
      throw config_error("TrainConfig: optimizer must be adam or sgd");
    }
    if (lr < 0.0) throw config_error("TrainConfig: lr must be non-negative");
    if (weight_decay < 0.0) throw config_error("TrainConfig: weight_decay must be non-negative");
    if (batch_size < 1) throw config_error("TrainConfig: batch_size must be positive");
    if (steps < 0) throw config_error("TrainConfig: steps must be non-negative");
  }
};

struct StepMetrics {
  int step = 0;      // 1-based
  double loss = 0.0; // mean cross-entropy over the step's batch
  double accuracy = 0.0;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
};

struct SampleLoss {
  double loss = 0.0;
  bool correct = false;
};

// Forward one sample and, when grads are requested, backprop into them.
template <typename Scalar>
SampleLoss classifier_step(const ClassifierModel<Scalar>& model,
                           const EncodedSample<Scalar>& sample,
                           FusorState<Scalar>* fusor_grads,
                           Matrix<Scalar>* head_W_grad,
                           Vector<Scalar>* head_b_grad) {
  const int K = model.num_classes();
  if (sample.label < 0 || sample.label >= K) {
    throw std::invalid_argument("classifier_step: label out of range");
  }
  FusorCache<Scalar> cache;
  FusorOutput<Scalar> out =
      fusor_forward(sample.views, sample.text, model.fusor,
                    fusor_grads ? &cache : nullptr);
  const Scalar S = Scalar(out.tokens.cols());
  Vector<Scalar> pooled = out.tokens.rowwise().mean();
  Vector<Scalar> logits = model.head_W * pooled + model.head_b;
  Vector<Scalar> probs = softmax(logits);

  SampleLoss result;
  result.loss = -std::log(std::max(double(probs(sample.label)), 1e-300));
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  result.correct = (int(best) == sample.label);

  if (fusor_grads) {
    Vector<Scalar> dlogits = probs;
    dlogits(sample.label) -= Scalar(1);
    *head_W_grad += dlogits * pooled.transpose();
    *head_b_grad += dlogits;
    Vector<Scalar> d_pooled = model.head_W.transpose() * dlogits;
    Matrix<Scalar> d_tokens = (d_pooled / S).replicate(1, out.tokens.cols());
    FusorGrads<Scalar> g = fusor_backward(d_tokens, cache, model.fusor);
    auto acc = tensor_refs(*fusor_grads);
    auto src = tensor_refs(g.params);
    for (size_t i = 0; i < acc.size(); ++i) *acc[i].tensor += *src[i].tensor;
  }
  return result;
}

template <typename Scalar>
TrainResult train(ClassifierModel<Scalar>& model,
                  const std::vector<EncodedSample<Scalar>>& data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const int n = int(data.size());
  const int batch = std::min(cfg.batch_size, n);
  const bool full_batch = batch == n;

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int cursor = n;  // forces an initial shuffle for sub-batches

  auto param_refs = tensor_refs(model.fusor);
  FusorState<Scalar> fusor_grads = zero_like(model.fusor);
  auto grad_refs = tensor_refs(fusor_grads);
  Matrix<Scalar> head_W_grad = Matrix<Scalar>::Zero(model.head_W.rows(), model.head_W.cols());
  Vector<Scalar> head_b_grad = Vector<Scalar>::Zero(model.head_b.size());

  // Adam slots, aligned with [fusor tensors..., head_W, head_b].
  const size_t slots = param_refs.size() + 2;
  std::vector<Matrix<Scalar>> m1(slots), m2(slots);
  if (cfg.optimizer == "adam") {
    for (size_t i = 0; i < param_refs.size(); ++i) {
      m1[i] = Matrix<Scalar>::Zero(param_refs[i].tensor->rows(), param_refs[i].tensor->cols());
      m2[i] = m1[i];
    }
    m1[slots - 2] = Matrix<Scalar>::Zero(model.head_W.rows(), model.head_W.cols());
    m2[slots - 2] = m1[slots - 2];
    m1[slots - 1] = Matrix<Scalar>::Zero(model.head_b.size(), 1);
    m2[slots - 1] = m1[slots - 1];
  }
  const Scalar beta1 = Scalar(0.9), beta2 = Scalar(0.999), eps = Scalar(1e-8);

  std::ofstream metrics_out;
  if (!cfg.metrics_path.empty()) {
    metrics_out.open(cfg.metrics_path);
    if (!metrics_out) throw std::runtime_error("train: cannot open metrics path " + cfg.metrics_path);
  }

  TrainResult result;
  result.metrics.reserve(size_t(cfg.steps));
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<int> indices;
    indices.reserve(size_t(batch));
    if (full_batch) {
      indices = perm;  // stable order: identical batches every step
    } else {
      for (int b = 0; b < batch; ++b) {
        if (cursor >= n) {
          std::shuffle(perm.begin(), perm.end(), rng);
          cursor = 0;
        }
        indices.push_back(perm[size_t(cursor++)]);
      }
    }

    for (auto& ref : grad_refs) ref.tensor->setZero();
    head_W_grad.setZero();
    head_b_grad.setZero();

    double loss_sum = 0.0;
    int correct = 0;
    for (int idx : indices) {
      auto s = classifier_step(model, data[size_t(idx)], &fusor_grads,
                               &head_W_grad, &head_b_grad);
      loss_sum += s.loss;
      correct += s.correct ? 1 : 0;
    }
    const double loss = loss_sum / double(indices.size());
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    }

    const Scalar inv_batch = Scalar(1) / Scalar(indices.size());
    const Scalar lr = Scalar(cfg.lr);
    auto update = [&](Matrix<Scalar>& param, const Matrix<Scalar>& grad_sum, size_t slot) {
      Matrix<Scalar> g = grad_sum * inv_batch;
      if (cfg.optimizer == "sgd") {
        param -= lr * g;
      } else {
        m1[slot] = beta1 * m1[slot] + (Scalar(1) - beta1) * g;
        m2[slot] = beta2 * m2[slot] + (Scalar(1) - beta2) * g.cwiseAbs2();
        const Scalar c1 = Scalar(1) - std::pow(beta1, Scalar(step));
        const Scalar c2 = Scalar(1) - std::pow(beta2, Scalar(step));
        param -= lr * (m1[slot] / c1)
                     .cwiseQuotient(((m2[slot] / c2).cwiseSqrt().array() + eps).matrix());
      }
      // Decoupled decay on weight matrices; biases and norms are exempt.
      if (cfg.weight_decay > 0.0 && param.cols() > 1) {
        param *= (Scalar(1) - lr * Scalar(cfg.weight_decay));
      }
    };
    for (size_t i = 0; i < param_refs.size(); ++i) {
      update(*param_refs[i].tensor, *grad_refs[i].tensor, i);
    }
    update(model.head_W, head_W_grad, slots - 2);
    Matrix<Scalar> head_b_as_matrix = head_b_grad;
    {
      Matrix<Scalar> param = model.head_b;
      update(param, head_b_as_matrix, slots - 1);
      model.head_b = param;
    }

    StepMetrics sm;
    sm.step = step;
    sm.loss = loss;
    sm.accuracy = double(correct) / double(indices.size());
    result.metrics.push_back(sm);
    if (metrics_out.is_open()) {
      nlohmann::json line = {{"step", sm.step}, {"loss", sm.loss}, {"acc", sm.accuracy}};
      metrics_out << line.dump() << "\n";
    }
  }
  return result;
}

struct DatasetAccuracy {
  double overall = 0.0;
  std::vector<double> per_class;   // indexed by class_id
  std::vector<int> per_class_count;
};

template <typename Scalar>
DatasetAccuracy dataset_accuracy(const ClassifierModel<Scalar>& model,
                                 const std::vector<EncodedSample<Scalar>>& data) {
  if (data.empty()) throw std::invalid_argument("dataset_accuracy: empty dataset");
  int max_class = 0;
  for (const auto& s : data) max_class = std::max(max_class, s.class_id);
  DatasetAccuracy acc;
  acc.per_class.assign(size_t(max_class) + 1, 0.0);
  acc.per_class_count.assign(size_t(max_class) + 1, 0);
  int correct = 0;
  for (const auto& sample : data) {
    auto s = classifier_step<Scalar>(model, sample, nullptr, nullptr, nullptr);
    correct += s.correct ? 1 : 0;
    acc.per_class[size_t(sample.class_id)] += s.correct ? 1.0 : 0.0;
    acc.per_class_count[size_t(sample.class_id)]++;
  }
  acc.overall = double(correct) / double(data.size());
  for (size_t k = 0; k < acc.per_class.size(); ++k) {
    if (acc.per_class_count[k] > 0) acc.per_class[k] /= double(acc.per_class_count[k]);
  }
  return acc;
}

}  // namespace mvf
