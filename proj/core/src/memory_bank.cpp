#include "memalign/memory_bank.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "memalign/error.hpp"

namespace memalign {

namespace {

// gamma * count is computed in binary floating point, so a product that is an
// integer in decimal (0.1 * 30) can land a few ulps above it. Snap those back
// before rounding.
double snap_to_integer(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) return nearest;
  return x;
}

}  // namespace

std::string_view to_string(StorageVariant v) {
  switch (v) {
    case StorageVariant::Imbalanced:
      return "imbalanced";
    case StorageVariant::Balanced:
      return "balanced";
  }
  return "unknown";
}

StorageVariant storage_variant_from_string(std::string_view name) {
  if (name == "imbalanced") return StorageVariant::Imbalanced;
  if (name == "balanced") return StorageVariant::Balanced;
  throw ConfigError("policy", "unknown storage policy '" + std::string(name) +
                                  "' (expected imbalanced or balanced)");
}

void StoragePolicy::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma", "must lie in (0, 1], got " + std::to_string(gamma));
  }
}

std::vector<std::size_t> compute_capacities(const StoragePolicy& policy,
                                            std::span<const std::size_t> category_counts) {
  policy.validate();
  const std::size_t num_categories = category_counts.size();
  if (num_categories < 2) {
    throw ConfigError("categories", "at least two categories are required");
  }

  std::vector<std::size_t> capacities(num_categories, 0);
  if (policy.variant == StorageVariant::Imbalanced) {
    for (std::size_t c = 0; c < num_categories; ++c) {
      const double scaled = snap_to_integer(policy.gamma * static_cast<double>(category_counts[c]));
      capacities[c] = static_cast<std::size_t>(std::ceil(scaled));
    }
    return capacities;
  }

  const std::size_t total =
      std::accumulate(category_counts.begin(), category_counts.end(), std::size_t{0});
  const double share = snap_to_integer(policy.gamma * static_cast<double>(total) /
                                       static_cast<double>(num_categories));
  const auto quota = static_cast<std::size_t>(std::floor(share));
  for (std::size_t c = 0; c < num_categories; ++c) {
    if (category_counts[c] < quota) {
      throw ConfigError("gamma", "balanced quota " + std::to_string(quota) +
                                     " exceeds the " + std::to_string(category_counts[c]) +
                                     " source instances of category " + std::to_string(c) +
                                     "; not enough source features for a balanced memory");
    }
    capacities[c] = quota;
  }
  return capacities;
}

MemoryBank::MemoryBank(std::size_t categories, std::size_t dim, StoragePolicy policy,
                       std::vector<std::size_t> capacities, std::uint64_t generation)
    : dim_(dim),
      policy_(policy),
      capacities_(std::move(capacities)),
      slots_(categories),
      norms_(categories),
      generation_(generation) {
  if (categories < 2) throw InvalidInput("memory bank needs at least two categories");
  if (dim == 0) throw InvalidInput("memory bank dimension must be positive");
  if (capacities_.size() != categories) {
    throw InvalidInput("capacity table has " + std::to_string(capacities_.size()) +
                       " entries for " + std::to_string(categories) + " categories");
  }
  policy_.validate();
}

void MemoryBank::check_category(int category) const {
  if (category < 0 || static_cast<std::size_t>(category) >= slots_.size()) {
    throw InvalidInput("category " + std::to_string(category) + " outside [0, " +
                       std::to_string(slots_.size()) + ")");
  }
}

std::size_t MemoryBank::capacity(int category) const {
  check_category(category);
  return capacities_[static_cast<std::size_t>(category)];
}

std::span<const FeatureVector> MemoryBank::slot(int category) const {
  check_category(category);
  return slots_[static_cast<std::size_t>(category)];
}

std::span<const double> MemoryBank::slot_norms(int category) const {
  check_category(category);
  return norms_[static_cast<std::size_t>(category)];
}

std::size_t MemoryBank::total_size() const noexcept {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.size();
  return n;
}

bool MemoryBank::all_populated() const noexcept {
  for (const auto& s : slots_) {
    if (s.empty()) return false;
  }
  return true;
}

InsertOutcome MemoryBank::insert_filtered(const InstanceRecord& record) {
  check_category(record.category);
  check_category(record.predicted_category);
  require_valid(record.feature, dim_, "memory insert");

  if (record.predicted_category != record.category) return InsertOutcome::RejectedWrongPrediction;
  const auto c = static_cast<std::size_t>(record.category);
  if (slots_[c].size() >= capacities_[c]) return InsertOutcome::RejectedFull;

  slots_[c].push_back(record.feature);
  norms_[c].push_back(l2_norm(record.feature.view()));
  return InsertOutcome::Stored;
}

MemoryBank MemoryBank::next_generation() const {
  return MemoryBank(categories(), dim_, policy_, capacities_, generation_ + 1);
}

MemoryBuilder::MemoryBuilder(const MemoryBank& previous) : bank_(previous.next_generation()) {}

InsertOutcome MemoryBuilder::add(const InstanceRecord& record) {
  const std::uint64_t key = (record.source_image_id << 20) ^ record.instance_index;
  if (record.instance_index >= (1u << 20) || !seen_.insert(key).second) {
    throw InvalidInput("duplicate or out-of-range instance key (image " +
                       std::to_string(record.source_image_id) + ", instance " +
                       std::to_string(record.instance_index) + ") in one build pass");
  }
  return bank_.insert_filtered(record);
}

MemoryBank MemoryBuilder::finish() && { return std::move(bank_); }

MemoryBank rebuild(const MemoryBank& bank, std::span<const InstanceRecord> stream) {
  MemoryBuilder builder(bank);
  for (const auto& record : stream) builder.add(record);
  return std::move(builder).finish();
}

std::vector<double> intra_class_spread(const MemoryBank& bank) {
  std::vector<double> spread(bank.categories(), 0.0);
  for (std::size_t c = 0; c < bank.categories(); ++c) {
    const auto slot = bank.slot(static_cast<int>(c));
    if (slot.size() < 2) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < slot.size(); ++i) {
      for (std::size_t j = i + 1; j < slot.size(); ++j) {
        sum += euclidean_distance(slot[i].view(), slot[j].view());
      }
    }
    const double pairs = 0.5 * static_cast<double>(slot.size()) * static_cast<double>(slot.size() - 1);
    spread[c] = sum / pairs;
  }
  return spread;
}

}  // namespace memalign
