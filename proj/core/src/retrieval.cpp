#include "memalign/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "memalign/error.hpp"

namespace memalign {

bool BBox::valid() const noexcept {
  return x1 >= 0.0 && y1 >= 0.0 && x2 <= 1.0 && y2 <= 1.0 && x1 < x2 && y1 < y2;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

ThresholdTable compute_thresholds(std::span<const double> per_category_accuracy, double base_delta) {
  if (!(base_delta > 0.0 && base_delta < 1.0)) {
    throw InvalidInput("base_delta must lie in (0, 1)");
  }
  double best = 0.0;
  for (double acc : per_category_accuracy) {
    if (!(acc >= 0.0 && acc <= 1.0)) throw InvalidInput("accuracy outside [0, 1]");
    best = std::max(best, acc);
  }

  ThresholdTable table;
  table.base_delta = base_delta;
  table.delta.resize(per_category_accuracy.size(), base_delta);
  if (best == 0.0) {
    table.fallback_uniform = true;
    return table;
  }
  const double lower = std::min(kMinCategoryThreshold, base_delta);
  for (std::size_t c = 0; c < per_category_accuracy.size(); ++c) {
    table.delta[c] = std::clamp(base_delta * per_category_accuracy[c] / best, lower, base_delta);
  }
  return table;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw InvalidInput("NMS IoU threshold must lie in (0, 1)");
  }
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const auto& candidate = detections[idx];
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.category == candidate.category && iou(k.box, candidate.box) >= iou_threshold;
    });
    if (!overlaps) kept.push_back(candidate);
  }
  return kept;
}

std::vector<Detection> filter_detections(std::span<const Detection> detections,
                                         const ThresholdTable& thresholds, double iou_threshold) {
  auto kept = nms(detections, iou_threshold);
  std::erase_if(kept, [&](const Detection& d) { return d.score < thresholds.threshold(d.category); });
  return kept;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine similarity of vectors with different dimensions");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidInput("cosine similarity of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

RetrievalResult retrieve(const MemoryBank& bank, const FeatureVector& query, int category,
                         std::size_t k, Rng& rng) {
  if (k == 0) throw InvalidInput("retrieve: K must be at least 1");
  require_valid(query, bank.dim(), "retrieve query");
  const double query_norm = l2_norm(query.view());
  if (!(query_norm > 0.0)) throw InvalidInput("retrieve: zero-norm query");

  const auto slot = bank.slot(category);
  if (slot.empty()) throw NoPositiveAvailable(category);
  const auto norms = bank.slot_norms(category);

  std::vector<double> sims(slot.size());
  for (std::size_t i = 0; i < slot.size(); ++i) {
    sims[i] = norms[i] > 0.0
                  ? std::clamp(dot(query.view(), slot[i].view()) / (query_norm * norms[i]), -1.0, 1.0)
                  : 0.0;
  }

  RetrievalResult result;
  result.query_category = category;
  result.positives_short = slot.size() < k;
  const std::size_t take = std::min(k, slot.size());

  std::vector<std::size_t> order(slot.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });
  result.positives.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.positives.push_back({slot[order[i]], sims[order[i]], order[i]});
  }

  for (std::size_t c = 0; c < bank.categories(); ++c) {
    if (static_cast<int>(c) == category) continue;
    const auto other = bank.slot(static_cast<int>(c));
    if (other.empty()) {
      ++result.negative_shortfall;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, other.size() - 1);
    const std::size_t idx = pick(rng);
    result.negatives.push_back({other[idx], static_cast<int>(c), idx});
  }
  return result;
}

double minibatch_match_rate(std::span<const int> source_categories,
                            std::span<const int> target_categories) {
  if (target_categories.empty()) throw InvalidInput("match rate of an empty target batch is undefined");
  const std::unordered_set<int> present(source_categories.begin(), source_categories.end());
  const auto matched = std::count_if(target_categories.begin(), target_categories.end(),
                                     [&](int c) { return present.contains(c); });
  return static_cast<double>(matched) / static_cast<double>(target_categories.size());
}

}  // namespace memalign
