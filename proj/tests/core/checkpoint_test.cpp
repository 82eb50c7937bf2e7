#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mvf/checkpoint.hpp"
#include "../test_util.hpp"

using namespace mvf;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("checkpoint round-trips bit-exactly, including extra tensors") {
  FusorConfig cfg;
  cfg.num_encoders = 3;
  cfg.num_layers = 2;
  cfg.encoder_channels = {16, 3, 16};
  cfg.seed = 31;
  FusorState<float> state = init_state<float>(cfg);
  std::mt19937_64 rng(510);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& ref : tensor_refs(state)) {
    for (Eigen::Index i = 0; i < ref.tensor->size(); ++i) (*ref.tensor)(i) = dist(rng);
  }
  Matrix<float> head = testutil::random_matrix<float>(4, 32, rng);
  Matrix<float> bias = testutil::random_matrix<float>(4, 1, rng);

  const std::string path = temp_path("mvf_ckpt_roundtrip.bin");
  save_checkpoint<float>(path, state, {{"head.W", head}, {"head.b", bias}});
  Checkpoint<float> loaded = load_checkpoint<float>(path);

  auto ra = tensor_refs(state);
  auto rb = tensor_refs(loaded.state);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].name == rb[i].name);
    CHECK(testutil::bit_equal(*ra[i].tensor, *rb[i].tensor));
  }
  REQUIRE(loaded.extra.count("head.W") == 1);
  REQUIRE(loaded.extra.count("head.b") == 1);
  CHECK(testutil::bit_equal(loaded.extra.at("head.W"), head));
  CHECK(testutil::bit_equal(loaded.extra.at("head.b"), bias));
  CHECK(loaded.state.config.num_encoders == 3);
  CHECK(loaded.state.config.encoder_channels == cfg.encoder_channels);

  // Save-load-save produces identical bytes.
  const std::string path2 = temp_path("mvf_ckpt_roundtrip2.bin");
  save_checkpoint<float>(path2, loaded.state, {{"head.W", loaded.extra.at("head.W")},
                                               {"head.b", loaded.extra.at("head.b")}});
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint rejects foreign files, wrong scalar type, truncation") {
  const std::string garbage = temp_path("mvf_ckpt_garbage.bin");
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(garbage), doctest::Contains("not a fusor checkpoint"),
                       std::runtime_error);
  std::remove(garbage.c_str());

  FusorConfig cfg;
  cfg.num_encoders = 2;
  cfg.num_layers = 1;
  cfg.channels = 4;
  cfg.heads = 2;
  cfg.height = 2;
  cfg.width = 2;
  cfg.text_dim = 3;
  cfg.gate_hidden = 2;
  cfg.out_dim = 2;
  FusorState<float> state = init_state<float>(cfg);
  const std::string path = temp_path("mvf_ckpt_scalar.bin");
  save_checkpoint<float>(path, state);
  CHECK_THROWS_WITH_AS(load_checkpoint<double>(path),
                       doctest::Contains("scalar type mismatch"), std::runtime_error);

  // Truncate the payload.
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), {});
  }
  const std::string cut = temp_path("mvf_ckpt_cut.bin");
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
  }
  CHECK_THROWS_AS(load_checkpoint<float>(cut), std::runtime_error);
  std::remove(path.c_str());
  std::remove(cut.c_str());

  CHECK_THROWS_AS(load_checkpoint<float>(temp_path("mvf_ckpt_missing.bin")),
                  std::runtime_error);
}
