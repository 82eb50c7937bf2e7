#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

enum class FusorMode { full, single_encoder, baseline_no_fusor };

inline std::string to_string(FusorMode mode) {
  switch (mode) {
    case FusorMode::full: return "full";
    case FusorMode::single_encoder: return "single_encoder";
    case FusorMode::baseline_no_fusor: return "baseline_no_fusor";
  }
  throw config_error("unknown FusorMode");
}

inline FusorMode fusor_mode_from_string(const std::string& s) {
  if (s == "full") return FusorMode::full;
  if (s == "single_encoder") return FusorMode::single_encoder;
  if (s == "baseline_no_fusor") return FusorMode::baseline_no_fusor;
  throw config_error("unknown fusor mode: " + s);
}

struct FusorConfig {
  int num_encoders = 4;   // N
  int num_queries = 8;    // M
  int num_layers = 3;     // L
  int channels = 24;      // C, canonical
  int height = 4;         // H, canonical
  int width = 4;          // W, canonical
  int text_dim = 32;      // D_t
  int heads = 4;
  int gate_hidden = 48;
  int out_dim = 48;       // D_out
  // Native channel count per encoder; an entry differing from `channels`
  // enables that encoder's learned 1x1 input projection. Empty means all
  // encoders already emit canonical channels.
  std::vector<int> encoder_channels;
  FusorMode mode = FusorMode::full;
  int single_encoder_index = 1;  // k, 1-based, used when mode=single_encoder
  std::uint64_t seed = 1234;

  int positions() const { return height * width; }

  int encoder_native_channels(int n) const {
    if (encoder_channels.empty()) return channels;
    return encoder_channels.at(static_cast<std::size_t>(n));
  }

  void validate() const {
    if (num_encoders < 1 || num_queries < 1 || num_layers < 1) {
      throw config_error("N, M, L must be positive");
    }
    if (channels < 1 || height < 1 || width < 1 || text_dim < 1 ||
        gate_hidden < 1 || out_dim < 1) {
      throw config_error("feature dimensions must be positive");
    }
    if (heads < 1 || channels % heads != 0) {
      throw config_error("heads must be positive and divide channels");
    }
    if (!encoder_channels.empty() &&
        static_cast<int>(encoder_channels.size()) != num_encoders) {
      throw config_error("encoder_channels length must equal num_encoders");
    }
    for (int c : encoder_channels) {
      if (c < 1) throw config_error("encoder channel counts must be positive");
    }
    if (mode == FusorMode::single_encoder &&
        (single_encoder_index < 1 || single_encoder_index > num_encoders)) {
      throw config_error("single_encoder index must be in [1, N]");
    }
  }
};

inline void to_json(nlohmann::json& j, const FusorConfig& c) {
  j = nlohmann::json{{"num_encoders", c.num_encoders},
                     {"num_queries", c.num_queries},
                     {"num_layers", c.num_layers},
                     {"channels", c.channels},
                     {"height", c.height},
                     {"width", c.width},
                     {"text_dim", c.text_dim},
                     {"heads", c.heads},
                     {"gate_hidden", c.gate_hidden},
                     {"out_dim", c.out_dim},
                     {"encoder_channels", c.encoder_channels},
                     {"mode", to_string(c.mode)},
                     {"single_encoder_index", c.single_encoder_index},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, FusorConfig& c) {
  FusorConfig defaults;
  c.num_encoders = j.value("num_encoders", defaults.num_encoders);
  c.num_queries = j.value("num_queries", defaults.num_queries);
  c.num_layers = j.value("num_layers", defaults.num_layers);
  c.channels = j.value("channels", defaults.channels);
  c.height = j.value("height", defaults.height);
  c.width = j.value("width", defaults.width);
  c.text_dim = j.value("text_dim", defaults.text_dim);
  c.heads = j.value("heads", defaults.heads);
  c.gate_hidden = j.value("gate_hidden", defaults.gate_hidden);
  c.out_dim = j.value("out_dim", defaults.out_dim);
  c.encoder_channels = j.value("encoder_channels", defaults.encoder_channels);
  c.mode = fusor_mode_from_string(j.value("mode", std::string("full")));
  c.single_encoder_index =
      j.value("single_encoder_index", defaults.single_encoder_index);
  c.seed = j.value("seed", defaults.seed);
}

}  // namespace mvf
