#pragma once

#include <map>
#include <random>
#include <set>
#include <string>

#include "mvf/fusor.hpp"

namespace mvf {

struct GradCheckOptions {
  double step = 1e-5;
  // Groups listed here are left out of the check and the report entirely.
  std::set<std::string> frozen_groups;
  // Test hook: scale the analytic gradients of one group to prove the
  // comparison actually detects wrong gradients.
  std::string corrupt_group;
  double corrupt_scale = 3.0;
};

struct GradCheckReport {
  std::map<std::string, double> max_rel_error_per_group;
  double overall_max = 0.0;
  int params_checked = 0;
};

// Shipped tiny configuration: every parameter group active (the second
// encoder carries a channel projection), 281 parameters total.
inline FusorConfig gradcheck_tiny_config() {
  FusorConfig c;
  c.num_encoders = 2;
  c.num_queries = 2;
  c.num_layers = 2;
  c.channels = 2;
  c.height = 2;
  c.width = 2;
  c.text_dim = 3;
  c.heads = 1;
  c.gate_hidden = 2;
  c.out_dim = 3;
  c.encoder_channels = {2, 3};
  c.seed = 7;
  return c;
}

// Central-difference check of fusor_backward in fp64 with loss
// 0.5*||tokens||^2. All parameters (including the zero-initialized ones) are
// re-randomized so no gradient path is trivially zero.
inline GradCheckReport run_gradcheck(const FusorConfig& config, std::uint64_t seed,
                                     const GradCheckOptions& opts = {}) {
  config.validate();
  FusorState<double> state = init_state<double>(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);
  for (auto& ref : tensor_refs(state)) {
    const bool is_norm_scale = ref.name.find("gamma") != std::string::npos;
    for (Eigen::Index i = 0; i < ref.tensor->size(); ++i) {
      // Norm scales stay near 1 so normalization remains well-conditioned.
      (*ref.tensor)(i) = is_norm_scale ? 1.0 + 0.75 * dist(rng) : dist(rng);
    }
  }

  std::vector<FeatureMap<double>> inputs;
  for (int n = 0; n < config.num_encoders; ++n) {
    FeatureMap<double> map(config.encoder_native_channels(n), config.height + 1,
                           config.width + 2);
    for (Eigen::Index i = 0; i < map.values.size(); ++i) map.values(i) = dist(rng);
    inputs.push_back(std::move(map));
  }
  Vector<double> text(config.text_dim);
  for (Eigen::Index i = 0; i < text.size(); ++i) text(i) = dist(rng);

  auto loss_of = [&]() {
    FusorOutput<double> out = fusor_forward<double>(inputs, text, state);
    return 0.5 * out.tokens.squaredNorm();
  };

  FusorCache<double> cache;
  FusorOutput<double> out = fusor_forward<double>(inputs, text, state, &cache);
  FusorGrads<double> grads = fusor_backward<double>(out.tokens, cache, state);

  if (!opts.corrupt_group.empty()) {
    for (auto& ref : tensor_refs(grads.params)) {
      if (ref.group == opts.corrupt_group) *ref.tensor *= opts.corrupt_scale;
    }
  }

  GradCheckReport report;
  auto analytic_refs = tensor_refs(grads.params);
  auto param_refs = tensor_refs(state);
  for (std::size_t t = 0; t < param_refs.size(); ++t) {
    if (opts.frozen_groups.count(param_refs[t].group)) continue;
    Matrix<double>& tensor = *param_refs[t].tensor;
    const Matrix<double>& analytic = *analytic_refs[t].tensor;
    double& group_max = report.max_rel_error_per_group[param_refs[t].group];
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double saved = tensor(i);
      tensor(i) = saved + opts.step;
      const double plus = loss_of();
      tensor(i) = saved - opts.step;
      const double minus = loss_of();
      tensor(i) = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double a = analytic(i);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
      const double rel = std::abs(a - numeric) / denom;
      group_max = std::max(group_max, rel);
      report.overall_max = std::max(report.overall_max, rel);
      ++report.params_checked;
    }
  }
  return report;
}

}  // namespace mvf
