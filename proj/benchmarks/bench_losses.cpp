#include <random>

#include <benchmark/benchmark.h>

#include "memalign/alignment_loss.hpp"

using namespace memalign;

namespace {

std::vector<double> random_vector(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

void BM_PositiveLoss(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto target = random_vector(64, rng);
  std::vector<ScoredMatch> positives;
  for (std::size_t i = 0; i < k; ++i) {
    auto e = random_vector(64, rng);
    positives.push_back({FeatureVector(e), cosine_similarity(target, e), i});
  }
  for (auto _ : state) benchmark::DoNotOptimize(positive_loss(target, positives));
}
BENCHMARK(BM_PositiveLoss)->Arg(1)->Arg(10)->Arg(30);

void BM_NegativeLoss(benchmark::State& state) {
  Rng rng(4);
  const auto target = random_vector(64, rng);
  std::vector<NegativeSample> negatives;
  for (int c = 1; c < 20; ++c) negatives.push_back({FeatureVector(random_vector(64, rng)), c, 0});
  for (auto _ : state) benchmark::DoNotOptimize(negative_loss(target, negatives, 1.0));
}
BENCHMARK(BM_NegativeLoss);

void BM_DiscriminatorLoss(benchmark::State& state) {
  Rng rng(5);
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    features.emplace_back(random_vector(64, rng));
    labels.push_back(i % 2);
  }
  const auto params = random_vector(65, rng);
  for (auto _ : state) benchmark::DoNotOptimize(discriminator_loss(features, labels, params));
}
BENCHMARK(BM_DiscriminatorLoss);

}  // namespace
