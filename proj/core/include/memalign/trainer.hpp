#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "memalign/alignment_loss.hpp"
#include "memalign/memory_bank.hpp"
#include "memalign/retrieval.hpp"
#include "memalign/toy_model.hpp"
#include "memalign/world.hpp"

namespace memalign {

struct TrainSchedule {
  std::size_t epochs = 12;
  std::size_t burn_in_epochs = 2;  ///< source-only epochs before adaptation terms switch on
  std::size_t batch_size = 8;      ///< images per step, split between source and target
  double memory_update_fraction = 1.0 / 3.0;
  double learning_rate = 0.04;
  double momentum = 0.9;
  std::size_t top_k = 1;
  bool stop_similarity_gradient = false;
  LossWeights weights;
  StoragePolicy storage;
  double base_delta = 0.8;
  double nms_iou = kDefaultNmsIou;

  std::size_t source_images_per_step() const noexcept { return (batch_size + 1) / 2; }
  std::size_t target_images_per_step() const noexcept { return batch_size / 2; }
  /// round(1 / memory_update_fraction)
  std::size_t rebuilds_per_epoch() const;

  void validate() const;

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

/// Confident target predictions per image: argmax category, max softmax
/// probability as score, then per-image NMS and category thresholds.
/// Detection::tag is the instance index within its image.
std::vector<std::vector<Detection>> pseudo_label(const ToyModel& model,
                                                 std::span<const SyntheticImage> target_images,
                                                 const ThresholdTable& thresholds, double iou_threshold);

/// What one step observed, for miss-rate and pair-similarity metrics.
struct StepLog {
  bool adapted = false;              ///< adaptation terms were active
  std::size_t filtered_targets = 0;  ///< target instances that survived pseudo-labelling
  std::size_t memory_misses = 0;     ///< of those, how many hit an empty M(c)
  std::size_t aligned = 0;
  bool bank_fully_populated = false;
  bool alignment_skipped = false;    ///< bank completely empty
  bool has_match_rate = false;
  double minibatch_match_rate = 0.0;
  double similarity_sum = 0.0;       ///< over every retrieved positive
  std::size_t similarity_count = 0;
  double similarity_min = std::numeric_limits<double>::infinity();
};

struct ObjectiveResult {
  LossBreakdown breakdown;
  /// Update direction: ordinary gradients of the weighted objective, except
  /// that the extractor receives the reversed discriminator gradient.
  ToyModel grads;
  StepLog log;
};

/// Evaluates every loss term on one step's batch. With `adapt` false only the
/// supervised source term is active (burn-in). `retrieval_rng` drives negative
/// sampling only.
ObjectiveResult compute_objective(const ToyModel& model, const MemoryBank& bank,
                                  std::span<const SyntheticImage> source,
                                  std::span<const SyntheticImage> target,
                                  const ThresholdTable& thresholds, const TrainSchedule& schedule,
                                  bool adapt, Rng& retrieval_rng);

/// compute_objective followed by one momentum-SGD update. Throws NonFiniteLoss
/// naming the offending term if any loss is NaN/Inf.
ObjectiveResult train_step(ToyModel& model, MomentumSgd& optimizer, const MemoryBank& bank,
                           std::span<const SyntheticImage> source,
                           std::span<const SyntheticImage> target,
                           const ThresholdTable& thresholds, const TrainSchedule& schedule,
                           bool adapt, Rng& retrieval_rng);

/// Instance-alignment loss alone at the model's current parameters, for a
/// fixed set of (image, instance, category) queries and pre-drawn negatives.
double evaluate_instance_loss(const ToyModel& model, const MemoryBank& bank,
                              std::span<const SyntheticImage> target,
                              std::span<const std::vector<Detection>> kept,
                              const TrainSchedule& schedule, Rng& retrieval_rng);

struct AccuracyReport {
  double overall = 0.0;
  double macro = 0.0;  ///< mean of per-category accuracies over categories present
  std::vector<double> per_category;
  std::vector<std::size_t> counts;
};

AccuracyReport evaluate_accuracy(const ToyModel& model, std::span<const SyntheticImage> images);

}  // namespace memalign
