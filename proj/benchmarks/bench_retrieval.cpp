#include <random>

#include <benchmark/benchmark.h>

#include "memalign/retrieval.hpp"
#include "memalign/snapshot.hpp"

using namespace memalign;

namespace {

FeatureVector random_feature(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return FeatureVector(std::move(v));
}

MemoryBank make_bank(std::size_t categories, std::size_t dim, std::size_t per_category) {
  Rng rng(1);
  MemoryBank bank(categories, dim, StoragePolicy{}, std::vector<std::size_t>(categories, per_category));
  for (std::size_t c = 0; c < categories; ++c) {
    for (std::size_t i = 0; i < per_category; ++i) {
      bank.insert_filtered({random_feature(dim, rng), static_cast<int>(c), static_cast<int>(c), c,
                            static_cast<std::uint32_t>(i)});
    }
  }
  return bank;
}

void BM_Retrieve(benchmark::State& state) {
  const auto per_category = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto bank = make_bank(20, 64, per_category);
  Rng rng(2);
  const auto query = random_feature(64, rng);
  int c = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieve(bank, query, c, k, rng));
    c = (c + 1) % 20;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(per_category));
}
BENCHMARK(BM_Retrieve)->Args({50, 1})->Args({500, 1})->Args({500, 30})->Args({5000, 1});

void BM_Rebuild(benchmark::State& state) {
  const auto bank = make_bank(20, 64, 500);
  std::vector<InstanceRecord> stream;
  for (std::size_t c = 0; c < 20; ++c) {
    const auto slot = bank.slot(static_cast<int>(c));
    for (std::size_t i = 0; i < slot.size(); ++i) {
      stream.push_back({slot[i], static_cast<int>(c), static_cast<int>(c), c, static_cast<std::uint32_t>(i)});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(rebuild(bank, stream));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_Rebuild);

void BM_SnapshotRoundTrip(benchmark::State& state) {
  const auto bank = make_bank(20, 64, 500);
  for (auto _ : state) benchmark::DoNotOptimize(load_snapshot(snapshot(bank)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(snapshot(bank).size()));
}
BENCHMARK(BM_SnapshotRoundTrip);

}  // namespace
