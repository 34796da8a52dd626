#include <cmath>

#include <gtest/gtest.h>

#include "memalign/error.hpp"
#include "memalign/retrieval.hpp"
#include "test_support.hpp"

using namespace memalign;
using memalign::testing::random_bank;
using memalign::testing::random_vector;

namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

Detection det(BBox box, int category, double score, std::size_t tag = 0) {
  return Detection{box, category, score, tag};
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(vec({2, 0}), vec({1, 0})), 1.0);
  EXPECT_NEAR(cosine_similarity(vec({1, 1}), vec({1, 0})), 0.70710678118654752, 1e-15);
}

TEST(Cosine, ZeroNormAndMismatchRejected) {
  EXPECT_THROW(cosine_similarity(vec({0, 0}), vec({1, 0})), InvalidInput);
  EXPECT_THROW(cosine_similarity(vec({1, 0, 0}), vec({1, 0})), InvalidInput);
}

TEST(Cosine, ScaleInvariantAndBounded) {
  Rng rng(31);
  std::uniform_real_distribution<double> alpha(1e-3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_vector(16, rng);
    const auto b = random_vector(16, rng);
    auto scaled = a;
    const double k = alpha(rng);
    for (double& x : scaled) x *= k;
    const double s = cosine_similarity(a, b);
    EXPECT_NEAR(cosine_similarity(scaled, b), s, 1e-12);
    EXPECT_LE(std::abs(s), 1.0);
  }
  const auto a = random_vector(16, rng);
  EXPECT_LE(cosine_similarity(a, a), 1.0);
}

TEST(Iou, OverlapAndDisjoint) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 0.2, 0.2}, {0.5, 0.5, 0.7, 0.7}), 0.0);
  EXPECT_NEAR(iou({0, 0, 0.4, 0.4}, {0.2, 0, 0.6, 0.4}), 0.08 / 0.24, 1e-15);
}

TEST(Nms, Examples) {
  const BBox a{0.0, 0.0, 0.5, 0.5};
  const BBox b{0.0, 0.0, 0.5, 0.5 / 1.25};  // IoU 0.8 with a
  ASSERT_NEAR(iou(a, b), 0.8, 1e-12);

  const std::vector<Detection> same{det(b, 1, 0.8), det(a, 1, 0.9)};
  const auto kept = nms(same, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);

  const std::vector<Detection> different{det(a, 1, 0.9), det(b, 2, 0.8)};
  EXPECT_EQ(nms(different, 0.5).size(), 2u);

  const std::vector<Detection> disjoint{det({0, 0, 0.2, 0.2}, 1, 0.5), det({0.5, 0.5, 0.9, 0.9}, 1, 0.6),
                                        det({0.3, 0.0, 0.4, 0.1}, 1, 0.7)};
  EXPECT_EQ(nms(disjoint, 0.5).size(), 3u);
}

TEST(Thresholds, Examples) {
  const auto uniform = compute_thresholds(vec({0.8, 0.8, 0.8}), 0.7);
  for (double d : uniform.delta) EXPECT_DOUBLE_EQ(d, 0.7);
  EXPECT_FALSE(uniform.fallback_uniform);

  const auto ratio = compute_thresholds(vec({0.9, 0.45}), 0.8);
  EXPECT_DOUBLE_EQ(ratio.threshold(0), 0.8);
  EXPECT_DOUBLE_EQ(ratio.threshold(1), 0.4);

  const auto clamped = compute_thresholds(vec({0.9, 0.0}), 0.8);
  EXPECT_DOUBLE_EQ(clamped.threshold(1), kMinCategoryThreshold);

  const auto zero = compute_thresholds(vec({0.0, 0.0}), 0.8);
  EXPECT_TRUE(zero.fallback_uniform);
  EXPECT_DOUBLE_EQ(zero.threshold(0), 0.8);
  EXPECT_DOUBLE_EQ(zero.threshold(1), 0.8);
}

TEST(Thresholds, Monotone) {
  Rng rng(32);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> acc(10);
    for (double& a : acc) a = unit(rng);
    const auto table = compute_thresholds(acc, 0.8);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      EXPECT_GE(table.delta[i], kMinCategoryThreshold);
      EXPECT_LE(table.delta[i], 0.8);
      for (std::size_t j = 0; j < acc.size(); ++j) {
        if (acc[i] <= acc[j]) EXPECT_LE(table.delta[i], table.delta[j]);
      }
    }
  }
}

TEST(FilterDetections, Examples) {
  ThresholdTable table{std::vector<double>(5, 0.7), 0.7, false};
  const BBox box{0.1, 0.1, 0.4, 0.4};
  EXPECT_EQ(filter_detections(std::vector{det(box, 3, 0.75)}, table, 0.5).size(), 1u);
  EXPECT_TRUE(filter_detections(std::vector{det(box, 3, 0.69)}, table, 0.5).empty());
  const std::vector<Detection> pair{det(box, 3, 0.65), det({0.1, 0.1, 0.4, 0.38}, 3, 0.6)};
  EXPECT_TRUE(filter_detections(pair, table, 0.5).empty());
}

TEST(FilterDetections, SubsetChain) {
  Rng rng(33);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cat(0, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<Detection> input;
    for (std::size_t i = 0; i < 12; ++i) {
      const double x = unit(rng) * 0.6;
      const double y = unit(rng) * 0.6;
      input.push_back(det({x, y, x + 0.3, y + 0.3}, cat(rng), unit(rng), i));
    }
    std::vector<double> acc{unit(rng), unit(rng), unit(rng), unit(rng)};
    const auto table = compute_thresholds(acc, 0.6);
    const auto after_nms = nms(input, 0.5);
    const auto filtered = filter_detections(input, table, 0.5);
    auto contains = [](const std::vector<Detection>& set, const Detection& d) {
      return std::any_of(set.begin(), set.end(), [&](const Detection& e) { return e.tag == d.tag; });
    };
    for (const auto& d : after_nms) EXPECT_TRUE(contains(input, d));
    for (const auto& d : filtered) EXPECT_TRUE(contains(after_nms, d));
  }
}

TEST(Retrieve, SingletonSlot) {
  MemoryBank bank(3, 2, StoragePolicy{}, {1, 1, 1});
  bank.insert_filtered({FeatureVector{1.0, 2.0}, 1, 1, 0, 0});
  Rng rng(1);
  const auto r = retrieve(bank, FeatureVector{-5.0, 0.5}, 1, 1, rng);
  ASSERT_EQ(r.positives.size(), 1u);
  EXPECT_EQ(r.positives[0].feature, (FeatureVector{1.0, 2.0}));
  EXPECT_FALSE(r.positives_short);
  EXPECT_EQ(r.negative_shortfall, 2u);
  EXPECT_TRUE(r.negatives.empty());
}

TEST(Retrieve, EmptySlotThrowsWithoutTouchingRng) {
  Rng seeded(34);
  auto bank = random_bank(4, 3, 2, seeded);
  MemoryBank partial(4, 3, StoragePolicy{}, {2, 2, 2, 2});
  for (int c = 1; c < 4; ++c) {
    for (const auto& f : bank.slot(c)) partial.insert_filtered({f, c, c, 0, 0});
  }
  Rng rng(99);
  const Rng before = rng;
  EXPECT_THROW(retrieve(partial, FeatureVector{1.0, 0.0, 0.0}, 0, 1, rng), NoPositiveAvailable);
  EXPECT_EQ(rng, before);

  // Negatives for a populated category are drawn as if nothing had happened.
  Rng fresh(99);
  const auto a = retrieve(partial, FeatureVector{1.0, 0.0, 0.0}, 1, 1, rng);
  const auto b = retrieve(partial, FeatureVector{1.0, 0.0, 0.0}, 1, 1, fresh);
  ASSERT_EQ(a.negatives.size(), b.negatives.size());
  for (std::size_t i = 0; i < a.negatives.size(); ++i) EXPECT_EQ(a.negatives[i].slot_index, b.negatives[i].slot_index);
  EXPECT_EQ(a.negative_shortfall, 1u);
}

TEST(Retrieve, MatchesLinearScanOracle) {
  Rng rng(35);
  const auto bank = random_bank(20, 64, 500, rng);
  std::uniform_int_distribution<int> cat(0, 19);
  for (int q = 0; q < 200; ++q) {
    const auto query = random_vector(64, rng);
    const int c = cat(rng);
    const auto got = retrieve(bank, FeatureVector(query), c, 5, rng);
    const auto want = memalign::testing::linear_scan(bank, query, c, 5);
    ASSERT_EQ(got.positives.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(got.positives[i].slot_index, want[i].index);
      EXPECT_EQ(got.positives[i].similarity, want[i].similarity);
    }
    EXPECT_EQ(got.negatives.size(), 19u);
    for (const auto& n : got.negatives) EXPECT_NE(n.category, c);
  }
}

TEST(Retrieve, TiesGoToLowerInsertionIndex) {
  MemoryBank bank(2, 2, StoragePolicy{}, {4, 1});
  for (int i = 0; i < 3; ++i) bank.insert_filtered({FeatureVector{1.0, 1.0}, 0, 0, 0, 0});
  bank.insert_filtered({FeatureVector{2.0, 0.0}, 0, 0, 0, 0});
  Rng rng(2);
  const auto r = retrieve(bank, FeatureVector{3.0, 3.0}, 0, 3, rng);
  ASSERT_EQ(r.positives.size(), 3u);
  EXPECT_EQ(r.positives[0].slot_index, 0u);
  EXPECT_EQ(r.positives[1].slot_index, 1u);
  EXPECT_EQ(r.positives[2].slot_index, 2u);
}

TEST(Retrieve, ShortSlotReportsIt) {
  Rng seeded(36);
  const auto bank = random_bank(3, 4, 2, seeded);
  Rng rng(3);
  const auto r = retrieve(bank, FeatureVector{1.0, 0.0, 0.0, 0.0}, 0, 5, rng);
  EXPECT_EQ(r.positives.size(), 2u);
  EXPECT_TRUE(r.positives_short);
}

TEST(Retrieve, TotalWhenEverySlotPopulated) {
  Rng rng(37);
  const auto bank = random_bank(6, 5, 1, rng);
  for (int i = 0; i < 300; ++i) {
    for (int c = 0; c < 6; ++c) {
      EXPECT_NO_THROW(retrieve(bank, FeatureVector(random_vector(5, rng)), c, 1, rng));
    }
  }
}

TEST(Retrieve, NegativesAreRoughlyUniform) {
  Rng seeded(38);
  const auto bank = random_bank(2, 2, 4, seeded);
  Rng rng(4);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 8000; ++i) {
    const auto r = retrieve(bank, FeatureVector{1.0, 0.0}, 0, 1, rng);
    ++hits[r.negatives.at(0).slot_index];
  }
  for (int h : hits) EXPECT_NEAR(h, 2000, 200);
}

TEST(MatchRate, Examples) {
  EXPECT_DOUBLE_EQ(minibatch_match_rate(std::vector{1, 2}, std::vector{1, 1, 3}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(minibatch_match_rate(std::vector{4, 5, 5}, std::vector{5, 4, 5}), 1.0);
  EXPECT_DOUBLE_EQ(minibatch_match_rate(std::vector{1}, std::vector{2, 3}), 0.0);
  EXPECT_THROW(minibatch_match_rate(std::vector{1}, std::vector<int>{}), InvalidInput);
}
