#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "memalign/feature.hpp"
#include "memalign/memory_bank.hpp"

namespace memalign {

using Rng = std::mt19937_64;

inline constexpr double kDefaultNmsIou = 0.5;
inline constexpr double kMinCategoryThreshold = 0.05;

/// Axis-aligned box in normalized image coordinates.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 1.0;
  double y2 = 1.0;

  bool valid() const noexcept;
  double area() const noexcept { return (x2 - x1) * (y2 - y1); }
};

double iou(const BBox& a, const BBox& b) noexcept;

struct Detection {
  BBox box;
  int category = 0;
  double score = 0.0;
  std::size_t tag = 0;  ///< caller's handle back to the instance; not interpreted
};

/// Per-category confidence thresholds.
struct ThresholdTable {
  std::vector<double> delta;
  double base_delta = 0.0;
  bool fallback_uniform = false;  ///< set when every accuracy was zero

  double threshold(int category) const { return delta.at(static_cast<std::size_t>(category)); }
};

/// delta_c = clamp(base * acc_c / max acc, 0.05, base). All-zero accuracies
/// fall back to base for every category with `fallback_uniform` set.
ThresholdTable compute_thresholds(std::span<const double> per_category_accuracy, double base_delta);

/// Greedy per-category NMS: highest score first; a box survives iff its IoU
/// with every kept box of its category is below `iou_threshold`.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold);

/// NMS, then drop detections scoring below their category threshold.
std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         const ThresholdTable& thresholds, double iou_threshold);

/// a.b / (|a||b|), clamped to [-1, 1]. Throws InvalidInput on a zero-norm or
/// mismatched input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct ScoredMatch {
  FeatureVector feature;
  double similarity = 0.0;
  std::size_t slot_index = 0;  ///< insertion index within M(category)
};

struct NegativeSample {
  FeatureVector feature;
  int category = 0;
  std::size_t slot_index = 0;
};

struct RetrievalResult {
  int query_category = 0;
  std::vector<ScoredMatch> positives;     ///< similarity descending
  std::vector<NegativeSample> negatives;  ///< ascending category order
  bool positives_short = false;           ///< |M(c)| < K
  std::size_t negative_shortfall = 0;     ///< other categories with empty slots
};

/// Top-K cosine matches from M(category) (ties to the lower insertion index)
/// and one uniformly drawn vector from every other non-empty slot.
///
/// Throws NoPositiveAvailable when M(category) is empty; `rng` is untouched
/// in that case. Stored vectors with zero norm score similarity 0.
RetrievalResult retrieve(const MemoryBank& bank, const FeatureVector& query, int category,
                         std::size_t k, Rng& rng);

/// Fraction of target instances whose category occurs in the source batch.
double minibatch_match_rate(std::span<const int> source_categories,
                            std::span<const int> target_categories);

}  // namespace memalign
