#include <doctest.h>

#include <random>

#include "mvf/adapters.hpp"
#include "mvf/task.hpp"
#include "test_util.hpp"

using namespace mvf;

namespace {

SyntheticImage constant_image(double value, int size = 32) {
  SyntheticImage img(size, size);
  img.pixels.values.setConstant(value);
  return img;
}

// Gray dyadic pixels (R=G=B=k/256) make the gray reduction and every pooling
// sum exact, so rotation equivariance can be asserted bit for bit.
SyntheticImage dyadic_noise_image(std::uint64_t seed, int size = 32) {
  SyntheticImage img(size, size);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  for (int s = 0; s < size * size; ++s) {
    const double v = dist(rng) / 256.0;
    for (int c = 0; c < 3; ++c) img.pixels.values(c, s) = v;
  }
  return img;
}

SyntheticImage rotate90(const SyntheticImage& img) {
  const int h = img.height(), w = img.width();
  SyntheticImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // (y, x) -> (x, h-1-y): quarter turn counter-clockwise of the grid
      for (int c = 0; c < 3; ++c) {
        out.pixels.values(c, x * h + (h - 1 - y)) = img.pixels.values(c, y * w + x);
      }
    }
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> rotate90_map(const FeatureMap<Scalar>& map) {
  FeatureMap<Scalar> out(map.channels, map.width, map.height);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      for (int c = 0; c < map.channels; ++c) {
        out.at(c, x, map.height - 1 - y) = map.at(c, y, x);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("mock encoders expose the declared native shapes") {
  auto encoders = mock_encoders<double>();
  REQUIRE(encoders.size() == 4);
  CHECK(encoders[0].name == "downsample");
  CHECK(encoders[1].name == "edge");
  CHECK(encoders[2].name == "stat");
  CHECK(encoders[3].name == "blur");
  const int channels[4] = {1, 2, 2, 3};
  const int sides[4] = {8, 16, 4, 4};
  for (int n = 0; n < 4; ++n) {
    CHECK(encoders[n].channels == channels[n]);
    CHECK(encoders[n].height == sides[n]);
    CHECK(encoders[n].width == sides[n]);
    auto map = encoders[n].encode(constant_image(0.5));
    CHECK(map.channels == channels[n]);
    CHECK(map.height == sides[n]);
    CHECK(map.width == sides[n]);
  }
  CHECK_THROWS_AS(make_mock_encoder<double>("sobel"), config_error);
}

TEST_CASE("constant gray image produces an exactly zero edge map") {
  auto edge = make_mock_encoder<double>("edge");
  auto map = edge.encode(constant_image(0.37));
  for (int s = 0; s < 16 * 16; ++s) {
    CHECK(map.values(0, s) == 0.0);
    CHECK(map.values(1, s) == 0.0);
  }
}

TEST_CASE("constant image maps to exact constants under pooling views") {
  const double v = 0.5;  // dyadic, so every average is exact
  auto img = constant_image(v);
  auto down = make_mock_encoder<double>("downsample").encode(img);
  for (int s = 0; s < 64; ++s) CHECK(down.values(0, s) == v);
  auto stat = make_mock_encoder<double>("stat").encode(img);
  for (int s = 0; s < 16; ++s) {
    CHECK(stat.values(0, s) == v);   // per-cell minimum of a constant
    CHECK(stat.values(1, s) == 0.0); // chroma
  }
  // blur is mean-free, so any constant collapses to exactly zero.
  auto blur = make_mock_encoder<double>("blur").encode(img);
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < 16; ++s) CHECK(blur.values(c, s) == 0.0);
  }
}

TEST_CASE("rotating the image commutes with the downsample view bit for bit") {
  auto down = make_mock_encoder<double>("downsample");
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    auto img = dyadic_noise_image(seed);
    auto rotated_then_encoded = down.encode(rotate90(img));
    auto encoded_then_rotated = rotate90_map(down.encode(img));
    REQUIRE(rotated_then_encoded.values.rows() == encoded_then_rotated.values.rows());
    REQUIRE(rotated_then_encoded.values.cols() == encoded_then_rotated.values.cols());
    CHECK(testutil::bit_equal(rotated_then_encoded.values, encoded_then_rotated.values));
  }
}

TEST_CASE("brightness ladder raises the pooled means of downsample and stat") {
  auto down = make_mock_encoder<double>("downsample");
  auto stat = make_mock_encoder<double>("stat");
  auto blur = make_mock_encoder<double>("blur");
  double prev_down = -1.0, prev_stat = -1.0;
  for (double v : {0.2, 0.4, 0.6, 0.8}) {
    const double down_mean = down.encode(constant_image(v)).values.row(0).mean();
    CHECK(down_mean > prev_down);
    prev_down = down_mean;
    const double stat_mean = stat.encode(constant_image(v)).values.mean();
    CHECK(stat_mean > prev_stat);
    prev_stat = stat_mean;
    // blur is mean-free, so the ladder never reaches it.
    CHECK(blur.encode(constant_image(v)).values.cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("stat chroma channel reads its axis and ignores the tint axis") {
  auto stat = make_mock_encoder<double>("stat");
  auto gray = stat.encode(constant_image(0.5));
  for (int s = 0; s < 16; ++s) CHECK(gray.values(1, s) == 0.0);

  SyntheticImage on_axis = constant_image(0.5);  // along (1,1,-2)
  on_axis.pixels.values.row(0).array() += 0.05;
  on_axis.pixels.values.row(1).array() += 0.05;
  on_axis.pixels.values.row(2).array() -= 0.10;
  auto a = stat.encode(on_axis);
  for (int s = 0; s < 16; ++s) CHECK(a.values(1, s) > 0.05);

  SyntheticImage off_axis = constant_image(0.5);  // along (1,-1,0): orthogonal
  off_axis.pixels.values.row(0).array() += 0.1;
  off_axis.pixels.values.row(1).array() -= 0.1;
  auto b = stat.encode(off_axis);
  for (int s = 0; s < 16; ++s) CHECK(b.values(1, s) < 1e-15);
}

TEST_CASE("edge view wraps around the image border") {
  SyntheticImage img = constant_image(0.0);
  for (int y = 0; y < 32; ++y) {
    for (int c = 0; c < 3; ++c) img.pixels.values(c, y * 32 + 0) = 1.0;
  }
  auto map = make_mock_encoder<double>("edge").encode(img);
  // |dx| is 1 at x=0 (step down) and at x=31 (wrap step up), zero elsewhere.
  CHECK(map.at(0, 0, 0) == doctest::Approx(0.5));    // pooled over 2px cells
  CHECK(map.at(0, 0, 15) == doctest::Approx(0.5));
  CHECK(map.at(0, 0, 7) == 0.0);
  CHECK(map.at(1, 0, 0) == 0.0);  // no vertical structure
}

TEST_CASE("encoders reject image sizes not divisible by their native shape") {
  SyntheticImage img(40, 40);  // divisible by 8 and 4, not by 16
  img.pixels.values.setConstant(0.5);
  CHECK_NOTHROW(make_mock_encoder<double>("downsample").encode(img));
  CHECK_NOTHROW(make_mock_encoder<double>("stat").encode(img));
  CHECK_THROWS_AS(make_mock_encoder<double>("edge").encode(img), config_error);
}

TEST_CASE("single-attribute image pairs hit exactly the designed views") {
  // Build image pairs that differ in exactly one latent attribute, with all
  // random draws (stripe phase, chroma cell signs) held fixed, and check
  // which views can tell them apart. Residues below 1e-12 are float noise
  // from reordered cancellations, not signal.
  auto encoders = mock_encoders<double>();
  auto views_of = [&](const std::array<int, 4>& levels) {
    std::mt19937_64 rng(99);
    auto img = mvf::detail::synthesize_image(levels, 32, rng);
    std::vector<FeatureMap<double>> views;
    for (auto& e : encoders) views.push_back(e.encode(img));
    return views;
  };
  auto max_diff = [](const FeatureMap<double>& a, const FeatureMap<double>& b) {
    return (a.values - b.values).cwiseAbs().maxCoeff();
  };

  SUBCASE("brightness level: downsample moves cleanly, stat only entangled") {
    auto a = views_of({0, 1, 1, 1}), b = views_of({3, 1, 1, 1});
    CHECK(max_diff(a[0], b[0]) == doctest::Approx(0.09));  // = the full shift
    CHECK(max_diff(a[1], b[1]) < 1e-12);   // differences drop the offset
    CHECK(max_diff(a[3], b[3]) < 1e-12);   // mean-free by construction
    // stat's minimum shifts by the same amount at a fixed stripe draw, but the
    // random stripe depth spans a wider range than brightness does, so the
    // level is unrecoverable from it in distribution (probe tests pin that).
    CHECK(max_diff(a[2], b[2]) == doctest::Approx(0.09));
  }
  SUBCASE("fine-stripe orientation: only edge moves") {
    auto a = views_of({1, 0, 1, 1}), b = views_of({1, 2, 1, 1});
    CHECK(max_diff(a[1], b[1]) > 0.05);
    CHECK(max_diff(a[0], b[0]) < 1e-12);
    CHECK(max_diff(a[2], b[2]) < 1e-12);
    CHECK(max_diff(a[3], b[3]) < 1e-12);
  }
  SUBCASE("chroma strength: gray-based views cannot move") {
    auto a = views_of({1, 1, 0, 1}), b = views_of({1, 1, 3, 1});
    CHECK(max_diff(a[2], b[2]) > 0.1);     // stat reads the magnitude, .135
    CHECK(max_diff(a[0], b[0]) < 1e-12);   // isoluminant construction
    CHECK(max_diff(a[1], b[1]) < 1e-12);
  }
  SUBCASE("tint strength: stat's chroma axis is orthogonal, only blur moves") {
    auto a = views_of({1, 1, 1, 0}), b = views_of({1, 1, 1, 3});
    CHECK(max_diff(a[3], b[3]) > 0.02);
    CHECK(max_diff(a[0], b[0]) < 1e-12);
    CHECK(max_diff(a[1], b[1]) < 1e-12);
    CHECK(max_diff(a[2], b[2]) < 1e-12);
  }
}
