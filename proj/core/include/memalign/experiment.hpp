#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memalign/alignment_loss.hpp"
#include "memalign/memory_bank.hpp"
#include "memalign/trainer.hpp"
#include "memalign/world.hpp"

namespace memalign {

/// Dataset sizes drawn from the world for one run.
struct DataParams {
  std::size_t source_images = 1500;
  std::size_t target_images = 1500;
  std::size_t test_per_category = 50;  ///< balanced held-out target evaluation set
  std::size_t min_instances = 1;
  std::size_t max_instances = 3;

  void validate() const;

  friend bool operator==(const DataParams&, const DataParams&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t num_seeds = 5;  ///< replicate count used by sweeps
  WorldParams world;
  DataParams data;
  TrainSchedule schedule;
  std::string out_dir = "out";

  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct EpochSummary {
  std::size_t epoch = 0;
  bool adapted = false;
  std::size_t steps = 0;
  LossBreakdown mean_losses;  ///< per-step means; counts are per-epoch sums
  double target_accuracy = 0.0;
};

struct MetricsReport {
  double target_accuracy = 0.0;          ///< class-mean accuracy on the balanced target test set
  double target_accuracy_overall = 0.0;  ///< same set, instance-weighted (equal here)
  double initial_target_accuracy = 0.0;
  double source_accuracy = 0.0;          ///< class-mean accuracy on the source training set
  std::vector<double> target_accuracy_per_category;

  double miss_rate_minibatch = 0.0;
  double miss_rate_memory = 0.0;
  /// Memory miss rate over steps after the bank first held every category.
  double miss_rate_memory_after_populated = 0.0;
  std::size_t logged_batches = 0;  ///< adapted steps with at least one filtered target
  std::size_t filtered_targets = 0;
  std::size_t filtered_targets_after_populated = 0;
  std::size_t memory_misses = 0;
  std::size_t skipped_alignment_steps = 0;
  std::optional<std::size_t> first_populated_step;

  double mean_pair_similarity = 0.0;
  double min_pair_similarity = 0.0;
  std::size_t aligned_pairs = 0;

  std::vector<double> intra_class_variance_proxy;
  std::vector<std::size_t> memory_counts;
  std::vector<std::size_t> memory_capacities;
  std::size_t min_memory_count = 0;
  std::size_t memory_generation = 0;
  std::size_t rebuilds = 0;
  std::size_t rebuilds_per_epoch = 0;
  std::size_t steps_per_epoch = 0;

  std::vector<EpochSummary> epochs;
};

/// Rates, pair similarity and variance proxy from a run's final bank and its
/// per-step logs. Rates are 0 when nothing was logged.
MetricsReport compute_metrics(const MemoryBank& bank, std::span<const StepLog> logs);

struct ExperimentResult {
  MetricsReport report;
  MemoryBank final_bank;
};

/// One fully deterministic training run.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class SweepParam { Lambda3, K, Gamma, Policy };

SweepParam sweep_param_from_string(const std::string& name);
std::string to_string(SweepParam p);

/// Copy of `config` with `param` set from its textual value.
ExperimentConfig apply_sweep_value(const ExperimentConfig& config, SweepParam param, const std::string& value);

struct SweepRow {
  std::string value;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsReport> runs;

  double mean_target_accuracy() const;
  double std_target_accuracy() const;
  double mean_miss_rate_minibatch() const;
  double mean_miss_rate_memory() const;
  double mean_pair_similarity() const;
  double mean_memory_size() const;
};

struct SweepTable {
  SweepParam param = SweepParam::Lambda3;
  std::vector<SweepRow> rows;  ///< in the order of `values`
};

/// num_seeds runs per value with seeds config.seed, config.seed + 1, ...
/// Up to `jobs` runs execute concurrently; rows come back in value order.
SweepTable sweep(const ExperimentConfig& config, SweepParam param, std::span<const std::string> values,
                 std::size_t jobs = 1);

}  // namespace memalign
