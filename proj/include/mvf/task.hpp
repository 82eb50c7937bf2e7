#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

#include "mvf/adapters.hpp"
#include "mvf/types.hpp"

namespace mvf {

// Each image carries four independent latent attributes, one per mock view.
// The construction makes every attribute unreadable through the other three
// views, either exactly (cancellation under their pooling/differencing/mean
// removal) or statistically (the random stripe amplitude spans more than the
// brightness range, so stat's order statistics confound the two; the random
// chroma cell signs make blur's view of chroma linearly unreadable). Routing
// is therefore the only way to solve the task:
//   0  global brightness level   -> downsample
//   1  stripe orientation/period -> edge
//   2  cell chroma strength      -> stat
//   3  warm/cold tint strength   -> blur
// Attributes are value-level signals rather than spatial arrangements:
// content-keyed attention is permutation-invariant over source positions, so
// a pure layout phase would be unreadable downstream no matter the view.
// The instruction names one attribute family; the label is its level (0..3).
struct RoutingTaskSpec {
  int num_classes = 4;        // how many attribute families are queried
  int samples_per_class = 64;
  int image_size = 32;        // must be a multiple of 32
  int templates_per_class = 3;
  std::vector<int> attribute_rule;  // class -> attribute family; default identity
  std::uint64_t seed = 2024;

  void validate() const {
    if (num_classes < 1 || num_classes > 4) {
      throw config_error("RoutingTaskSpec: num_classes must be in [1,4]");
    }
    if (samples_per_class < 1) {
      throw config_error("RoutingTaskSpec: samples_per_class must be positive");
    }
    if (image_size < 32 || image_size % 32 != 0) {
      throw config_error("RoutingTaskSpec: image_size must be a multiple of 32");
    }
    if (templates_per_class < 1 || templates_per_class > 3) {
      throw config_error("RoutingTaskSpec: templates_per_class must be in [1,3]");
    }
    if (!attribute_rule.empty()) {
      if (int(attribute_rule.size()) != num_classes) {
        throw config_error("RoutingTaskSpec: attribute_rule size must equal num_classes");
      }
      for (int a : attribute_rule) {
        if (a < 0 || a > 3) throw config_error("RoutingTaskSpec: attribute_rule entries must be in [0,3]");
      }
    }
  }

  std::vector<int> resolved_rule() const {
    if (!attribute_rule.empty()) return attribute_rule;
    std::vector<int> rule(num_classes);
    for (int k = 0; k < num_classes; ++k) rule[k] = k;
    return rule;
  }
};

struct RoutingSample {
  SyntheticImage image;
  std::string instruction;
  int class_id = 0;            // which attribute family the instruction queries
  int label = 0;               // level of that attribute
  std::array<int, 4> levels{}; // all four latent levels, for diagnostics
};

struct RoutingDataset {
  RoutingTaskSpec spec;
  std::vector<RoutingSample> samples;
};

inline const std::vector<std::string>& instruction_templates(int class_id) {
  static const std::vector<std::string> templates[4] = {
      {"assess the exposure level",
       "judge the overall brightness",
       "evaluate the lightness of the scene"},
      {"assess the composition",
       "critique the fine detail structure",
       "judge the framing of the line work"},
      {"rate the color saturation",
       "assess the vibrance of the palette",
       "evaluate the chroma intensity"},
      {"evaluate the warm cold balance",
       "assess the tonal zoning",
       "judge the placement of warm tones"}};
  if (class_id < 0 || class_id > 3) throw config_error("instruction class out of range");
  return templates[class_id];
}

namespace detail {

// Amplitudes keep the worst-case pixel excursion below 0.5, so no clipping.
constexpr double kBrightStep = 0.03;   // levels map to -.045, -.015, +.015, +.045
constexpr double kStripeAmpLo = 0.11;  // amplitude is a per-image nuisance draw;
constexpr double kStripeAmpHi = 0.21;  // its span exceeds the brightness span, and
                                       // 2*lo > hi keeps the period classes apart
constexpr double kChromaStep = 0.045;  // levels map to 0, .045, .09, .135
constexpr double kTintStep = 0.04;     // levels map to 0, .04, .08, .12

inline SyntheticImage synthesize_image(const std::array<int, 4>& levels, int size,
                                       std::mt19937_64& rng) {
  const int unit = size / 32;
  SyntheticImage img(size, size);
  img.pixels.values.setConstant(0.5);

  // Attribute 0: global brightness offset on all channels.
  const double bright = kBrightStep * (levels[0] - 1.5);

  // Attribute 1: gray fine stripes; orientation and period from level, with a
  // random phase so stripe position never encodes anything and a random
  // amplitude so stripe depth masks the brightness offset in order statistics.
  const bool stripe_vertical = levels[1] < 2;
  const int stripe_half = ((levels[1] % 2 == 0) ? 1 : 2) * unit;
  std::uniform_real_distribution<double> amp_dist(kStripeAmpLo, kStripeAmpHi);
  const double stripe_amp = amp_dist(rng);
  std::uniform_int_distribution<int> phase_dist(0, 2 * stripe_half - 1);
  const int stripe_phase = phase_dist(rng);

  // Attribute 2: isoluminant chroma on (1,1,-2)/sqrt(6), random sign per cell.
  const double chroma = kChromaStep * levels[2];
  const int cell = 8 * unit;
  const int cells = size / cell;
  std::vector<int> cell_sign(cells * cells);
  std::uniform_int_distribution<int> sign_dist(0, 1);
  for (auto& s : cell_sign) s = sign_dist(rng) == 0 ? -1 : 1;
  const double ax2[3] = {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0),
                         -2.0 / std::sqrt(6.0)};

  // Attribute 3: isoluminant warm/cold tint on (1,-1,0)/sqrt(2), warm left
  // half, cold right half; the level sets the strength.
  const double tint = kTintStep * levels[3];
  const double ax1[3] = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0};

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int s = y * size + x;
      const int stripe_u = (stripe_vertical ? x : y) + stripe_phase;
      const double stripes =
          stripe_amp * (((stripe_u / stripe_half) % 2 == 0) ? 1.0 : -1.0);
      const double cell_chroma =
          chroma * cell_sign[(y / cell) * cells + (x / cell)];
      const double signed_tint = tint * ((x < size / 2) ? 1.0 : -1.0);
      for (int c = 0; c < 3; ++c) {
        img.pixels.values(c, s) =
            0.5 + bright + stripes + cell_chroma * ax2[c] + signed_tint * ax1[c];
      }
    }
  }
  for (int i = 0; i < 4; ++i) img.meta["level" + std::to_string(i)] = levels[i];
  img.meta["stripe_phase"] = stripe_phase;
  img.meta["stripe_amp"] = stripe_amp;
  return img;
}

}  // namespace detail

// Deterministic given the spec. Labels are exactly balanced per class when
// samples_per_class is a multiple of 4, round-robin otherwise.
inline RoutingDataset generate_task(const RoutingTaskSpec& spec) {
  spec.validate();
  const std::vector<int> rule = spec.resolved_rule();
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> level_dist(0, 3);

  RoutingDataset dataset;
  dataset.spec = spec;
  dataset.samples.reserve(size_t(spec.num_classes) * spec.samples_per_class);
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      RoutingSample sample;
      sample.class_id = k;
      for (int a = 0; a < 4; ++a) sample.levels[a] = level_dist(rng);
      sample.levels[rule[k]] = i % 4;  // balance the queried attribute
      sample.label = sample.levels[rule[k]];
      sample.image = detail::synthesize_image(sample.levels, spec.image_size, rng);
      const auto& templates = instruction_templates(rule[k]);
      sample.instruction = templates[i % spec.templates_per_class];
      dataset.samples.push_back(std::move(sample));
    }
  }
  std::shuffle(dataset.samples.begin(), dataset.samples.end(), rng);
  return dataset;
}

}  // namespace mvf
