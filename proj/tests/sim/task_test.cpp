#include <doctest.h>

#include <map>
#include <set>

#include "mvf/task.hpp"
#include "test_util.hpp"

using namespace mvf;

TEST_CASE("labels are exactly balanced per class when divisible by four") {
  RoutingTaskSpec spec;
  spec.num_classes = 4;
  spec.samples_per_class = 16;
  auto dataset = generate_task(spec);
  REQUIRE(dataset.samples.size() == 64);
  std::map<std::pair<int, int>, int> counts;
  for (const auto& s : dataset.samples) counts[{s.class_id, s.label}]++;
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 4; ++l) CHECK(counts[{k, l}] == 4);
  }
}

TEST_CASE("the label always equals the queried attribute level") {
  RoutingTaskSpec spec;
  spec.samples_per_class = 8;
  auto dataset = generate_task(spec);
  for (const auto& s : dataset.samples) {
    CHECK(s.label == s.levels[s.class_id]);  // identity rule
  }
}

TEST_CASE("same seed reproduces the dataset bit for bit; seeds differ") {
  RoutingTaskSpec spec;
  spec.samples_per_class = 4;
  auto a = generate_task(spec);
  auto b = generate_task(spec);
  REQUIRE(a.samples.size() == b.samples.size());
  bool all_equal = true;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].instruction == b.samples[i].instruction);
    CHECK(a.samples[i].label == b.samples[i].label);
    all_equal = all_equal && testutil::bit_equal(a.samples[i].image.pixels.values,
                                                 b.samples[i].image.pixels.values);
  }
  CHECK(all_equal);

  spec.seed = 777;
  auto c = generate_task(spec);
  bool any_diff = false;
  for (size_t i = 0; i < a.samples.size(); ++i) {
    any_diff = any_diff || !testutil::bit_equal(a.samples[i].image.pixels.values,
                                                c.samples[i].image.pixels.values);
  }
  CHECK(any_diff);
}

TEST_CASE("single-class spec yields identical instructions with one live view") {
  RoutingTaskSpec spec;
  spec.num_classes = 1;
  spec.samples_per_class = 8;
  spec.templates_per_class = 1;
  auto dataset = generate_task(spec);
  REQUIRE(dataset.samples.size() == 8);
  std::set<std::string> instructions;
  std::map<int, int> label_counts;
  for (const auto& s : dataset.samples) {
    instructions.insert(s.instruction);
    label_counts[s.label]++;
    CHECK(s.label == s.levels[0]);  // determined by the block-stripe attribute
  }
  CHECK(instructions.size() == 1);
  for (int l = 0; l < 4; ++l) CHECK(label_counts[l] == 2);
}

TEST_CASE("attribute_rule redirects both label and instruction wording") {
  RoutingTaskSpec spec;
  spec.num_classes = 2;
  spec.samples_per_class = 4;
  spec.attribute_rule = {2, 1};  // class 0 asks about chroma, class 1 about stripes
  auto dataset = generate_task(spec);
  const auto& chroma_templates = instruction_templates(2);
  const auto& stripe_templates = instruction_templates(1);
  auto contains = [](const std::vector<std::string>& set, const std::string& s) {
    for (const auto& t : set) {
      if (t == s) return true;
    }
    return false;
  };
  for (const auto& s : dataset.samples) {
    if (s.class_id == 0) {
      CHECK(s.label == s.levels[2]);
      CHECK(contains(chroma_templates, s.instruction));
    } else {
      CHECK(s.label == s.levels[1]);
      CHECK(contains(stripe_templates, s.instruction));
    }
  }
}

TEST_CASE("pixel values never clip") {
  RoutingTaskSpec spec;
  spec.samples_per_class = 4;
  auto dataset = generate_task(spec);
  for (const auto& s : dataset.samples) {
    CHECK(s.image.pixels.values.minCoeff() > 0.05);
    CHECK(s.image.pixels.values.maxCoeff() < 0.95);
  }
}

TEST_CASE("invalid task specs are rejected") {
  RoutingTaskSpec spec;
  spec.num_classes = 5;
  CHECK_THROWS_AS(generate_task(spec), config_error);
  spec.num_classes = 4;
  spec.image_size = 48;
  CHECK_THROWS_AS(generate_task(spec), config_error);
  spec.image_size = 64;
  CHECK_NOTHROW(generate_task(spec));
  spec.attribute_rule = {0, 1, 2};
  CHECK_THROWS_AS(generate_task(spec), config_error);
  spec.attribute_rule = {0, 1, 2, 9};
  CHECK_THROWS_AS(generate_task(spec), config_error);
}
