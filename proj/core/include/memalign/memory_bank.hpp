#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "memalign/feature.hpp"

namespace memalign {

enum class StorageVariant : std::uint8_t {
  Imbalanced = 0,  ///< |M(c)| proportional to the category's source count
  Balanced = 1,    ///< equal quota for every category
};

std::string_view to_string(StorageVariant v);
StorageVariant storage_variant_from_string(std::string_view name);

struct StoragePolicy {
  StorageVariant variant = StorageVariant::Imbalanced;
  double gamma = 1.0;  ///< fraction of source instances retained, in (0, 1]

  void validate() const;

  friend bool operator==(const StoragePolicy&, const StoragePolicy&) = default;
};

/// Per-category slot capacities.
///
/// Imbalanced: ceil(gamma * count(c)). Balanced: floor(gamma * total / C) for
/// every category; throws ConfigError when that quota exceeds the count of
/// some category, since that slot could never be filled.
std::vector<std::size_t> compute_capacities(const StoragePolicy& policy,
                                            std::span<const std::size_t> category_counts);

/// One source instance offered to the memory.
struct InstanceRecord {
  FeatureVector feature;
  int category = 0;            ///< ground-truth label
  int predicted_category = 0;  ///< classifier argmax at extraction time
  std::uint64_t source_image_id = 0;
  std::uint32_t instance_index = 0;
};

enum class InsertOutcome { Stored, RejectedWrongPrediction, RejectedFull };

/// Category-partitioned store of quality-gated source features.
class MemoryBank {
 public:
  MemoryBank(std::size_t categories, std::size_t dim, StoragePolicy policy,
             std::vector<std::size_t> capacities, std::uint64_t generation = 0);

  std::size_t categories() const noexcept { return slots_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const StoragePolicy& policy() const noexcept { return policy_; }
  std::uint64_t generation() const noexcept { return generation_; }

  std::size_t capacity(int category) const;
  const std::vector<std::size_t>& capacities() const noexcept { return capacities_; }

  std::span<const FeatureVector> slot(int category) const;
  /// L2 norms of `slot(category)`, index-aligned.
  std::span<const double> slot_norms(int category) const;
  std::size_t size(int category) const { return slot(category).size(); }
  std::size_t total_size() const noexcept;
  bool all_populated() const noexcept;

  /// Quality gate + capacity check. Stores only if the prediction is correct
  /// and the slot has room; the bank is unchanged otherwise.
  InsertOutcome insert_filtered(const InstanceRecord& record);

  /// Empty bank with the same shape and policy, generation advanced by one.
  MemoryBank next_generation() const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  void check_category(int category) const;

  std::size_t dim_;
  StoragePolicy policy_;
  std::vector<std::size_t> capacities_;
  std::vector<std::vector<FeatureVector>> slots_;
  std::vector<std::vector<double>> norms_;
  std::uint64_t generation_;
};

/// Accumulates one full memory build pass. Rejects a repeated
/// (source_image_id, instance_index) within the pass.
class MemoryBuilder {
 public:
  explicit MemoryBuilder(const MemoryBank& previous);

  InsertOutcome add(const InstanceRecord& record);
  MemoryBank finish() &&;

 private:
  MemoryBank bank_;
  std::unordered_set<std::uint64_t> seen_;
};

/// Fresh bank from a full pass over `stream` in order; old contents discarded.
MemoryBank rebuild(const MemoryBank& bank, std::span<const InstanceRecord> stream);

/// Per-category mean pairwise Euclidean distance among stored vectors
/// (0 for slots with fewer than two entries). Stand-in for an FID-style
/// intra-class variance measurement.
std::vector<double> intra_class_spread(const MemoryBank& bank);

/// Holds the bank readers see. Readers take a shared_ptr copy and keep a
/// consistent view; publish() swaps in a fully built replacement.
class MemoryStore {
 public:
  explicit MemoryStore(MemoryBank initial)
      : current_(std::make_shared<const MemoryBank>(std::move(initial))) {}

  std::shared_ptr<const MemoryBank> current() const {
    std::lock_guard lock(mutex_);
    return current_;
  }

  void publish(MemoryBank next) {
    auto fresh = std::make_shared<const MemoryBank>(std::move(next));
    std::lock_guard lock(mutex_);
    current_ = std::move(fresh);
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const MemoryBank> current_;
};

}  // namespace memalign
