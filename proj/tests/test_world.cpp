#include <gtest/gtest.h>

#include "memalign/error.hpp"
#include "memalign/world.hpp"

using namespace memalign;

TEST(Zipf, NormalisedAndDecreasing) {
  const auto f = zipf_frequencies(20, 1.2);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sum += f[i];
    if (i > 0) EXPECT_LT(f[i], f[i - 1]);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const auto flat = zipf_frequencies(5, 0.0);
  for (double x : flat) EXPECT_DOUBLE_EQ(x, 0.2);
}

TEST(Zipf, SampledFrequenciesAreSkewed) {
  WorldParams p;
  p.zipf_exponent = 1.5;
  const auto world = make_world(p, 3);
  const auto images = generate_batch(world, Domain::Source, 10000, 1, 1, 0);
  std::vector<std::size_t> counts(20, 0);
  for (const auto& image : images) ++counts[static_cast<std::size_t>(image.instances[0].category)];
  EXPECT_GT(static_cast<double>(counts[0]) / 1e4, 0.25);
  EXPECT_LT(static_cast<double>(counts[19]) / 1e4, 0.01);
}

TEST(World, DeterministicInSeedAndCounter) {
  WorldParams p;
  p.rotation_strength = 1.0;
  p.shift_norm = 2.0;
  const auto world = make_world(p, 11);
  const auto a = generate_batch(world, Domain::Target, 20, 1, 3, 5);
  const auto b = generate_batch(world, Domain::Target, 20, 1, 3, 5);
  const auto c = generate_batch(world, Domain::Target, 20, 1, 3, 6);
  ASSERT_EQ(a.size(), b.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].instances.size(), b[i].instances.size());
    for (std::size_t j = 0; j < a[i].instances.size(); ++j) {
      EXPECT_EQ(a[i].instances[j].category, b[i].instances[j].category);
      EXPECT_EQ(a[i].instances[j].input, b[i].instances[j].input);
    }
    if (c[i].instances.size() != a[i].instances.size() ||
        c[i].instances[0].input != a[i].instances[0].input) {
      any_difference = true;
    }
  }
  EXPECT_TRUE(any_difference);
  const auto again = make_world(p, 11);
  EXPECT_EQ(again.shift_matrix, world.shift_matrix);
}

TEST(World, DegenerateMapMakesDomainsIdentical) {
  WorldParams p;
  p.class_spread = 0.0;
  const auto world = make_world(p, 2);
  const auto source = generate_balanced_set(world, Domain::Source, 2, 0);
  const auto target = generate_balanced_set(world, Domain::Target, 2, 0);
  ASSERT_EQ(source.size(), target.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    EXPECT_EQ(source[i].instances[0].category, target[i].instances[0].category);
    EXPECT_EQ(source[i].instances[0].input, target[i].instances[0].input);
  }
}

TEST(World, RotationIsOrthogonalAndLowRankWhenAsked) {
  WorldParams p;
  p.rotation_strength = 3.0;
  p.rotation_rank = 8;
  const auto world = make_world(p, 4);
  const auto& a = world.shift_matrix;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  EXPECT_LT((a.transpose() * a - eye).norm(), 1e-10);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a - eye);
  EXPECT_LE(lu.rank(), 8);
  EXPECT_GT(lu.rank(), 0);
  EXPECT_NEAR(world.shift_offset.norm(), p.shift_norm, 1e-12);
}

TEST(World, InstanceCountsInRangeAndBoxesValid) {
  const auto world = make_world(WorldParams{}, 5);
  const auto images = generate_batch(world, Domain::Source, 200, 2, 4, 1);
  for (const auto& image : images) {
    EXPECT_GE(image.instances.size(), 2u);
    EXPECT_LE(image.instances.size(), 4u);
    for (const auto& inst : image.instances) EXPECT_TRUE(inst.box.valid());
  }
}

TEST(World, InvalidParametersRejected) {
  WorldParams p;
  p.categories = 1;
  EXPECT_THROW(make_world(p, 0), ConfigError);
  p = WorldParams{};
  p.rotation_rank = 33;
  EXPECT_THROW(make_world(p, 0), ConfigError);
  const auto world = make_world(WorldParams{}, 0);
  EXPECT_THROW(generate_batch(world, Domain::Source, 0, 1, 1, 0), InvalidInput);
  EXPECT_THROW(generate_batch(world, Domain::Source, 1, 3, 2, 0), InvalidInput);
}
