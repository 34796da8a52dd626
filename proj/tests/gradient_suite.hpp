#pragma once

// Finite-difference checks of every loss kernel over random draws. Shared by
// the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "memalign/alignment_loss.hpp"
#include "memalign/feature.hpp"
#include "test_support.hpp"

namespace memalign::testing {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kKinkExclusion = 1e-3;

struct GradientSuiteResult {
  double worst_positive = 0.0;
  double worst_negative = 0.0;
  double worst_instance = 0.0;
  double worst_discriminator = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_near_kink = 0;

  double worst() const {
    return std::max({worst_positive, worst_negative, worst_instance, worst_discriminator});
  }
};

inline std::vector<ScoredMatch> draw_positives(const std::vector<double>& target, std::size_t k, Rng& rng) {
  std::vector<ScoredMatch> out;
  for (std::size_t i = 0; i < k; ++i) {
    auto e = random_vector(target.size(), rng);
    out.push_back({FeatureVector(e), cosine_similarity(target, e), i});
  }
  return out;
}

inline std::vector<NegativeSample> draw_negatives(const std::vector<double>& target, std::size_t n, double margin,
                                                  Rng& rng) {
  std::vector<NegativeSample> out;
  std::uniform_real_distribution<double> radius(0.2, 2.0 * margin);
  for (std::size_t i = 0; i < n; ++i) {
    // Place negatives on both sides of the margin so both hinge branches get exercised.
    auto dir = random_vector(target.size(), rng);
    const double len = l2_norm(dir);
    const double r = radius(rng);
    std::vector<double> e(target.size());
    for (std::size_t j = 0; j < e.size(); ++j) e[j] = target[j] + r * dir[j] / len;
    out.push_back({FeatureVector(e), static_cast<int>(i + 1), 0});
  }
  return out;
}

inline bool near_positive_kink(const std::vector<double>& target, const std::vector<ScoredMatch>& positives) {
  for (const auto& p : positives) {
    if (euclidean_distance(target, p.feature.view()) < kKinkExclusion) return true;
    if (1.0 - std::abs(cosine_similarity(target, p.feature.view())) < kKinkExclusion) return true;
  }
  return false;
}

inline bool near_negative_kink(const std::vector<double>& target, const std::vector<NegativeSample>& negatives,
                               double margin) {
  for (const auto& n : negatives) {
    const double d = euclidean_distance(target, n.feature.view());
    if (std::abs(d - margin) < kKinkExclusion || d < kKinkExclusion) return true;
  }
  return false;
}

/// One draw of every kernel per seed; returns the worst relative errors seen.
inline GradientSuiteResult run_gradient_suite(std::uint64_t first_seed, std::size_t seeds) {
  GradientSuiteResult result;
  const double h = kFiniteDifferenceStep;
  for (std::uint64_t s = first_seed; s < first_seed + seeds; ++s) {
    Rng rng(s);
    std::uniform_int_distribution<std::size_t> dim_pick(2, 12);
    std::uniform_int_distribution<std::size_t> k_pick(1, 5);
    std::uniform_real_distribution<double> margin_pick(0.5, 2.0);
    const std::size_t dim = dim_pick(rng);
    const double margin = margin_pick(rng);

    // L+
    {
      const auto target = random_vector(dim, rng);
      const auto positives = draw_positives(target, k_pick(rng), rng);
      if (near_positive_kink(target, positives)) {
        ++result.skipped_near_kink;
      } else {
        const auto analytic = positive_loss(target, positives).grad;
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& x) { return positive_loss(x, positives).value; }, target, h);
        result.worst_positive = std::max(result.worst_positive, relative_error(analytic, numeric));
        ++result.checked;
      }
    }

    // L-
    {
      const auto target = random_vector(dim, rng);
      const auto negatives = draw_negatives(target, k_pick(rng), margin, rng);
      if (near_negative_kink(target, negatives, margin)) {
        ++result.skipped_near_kink;
      } else {
        const auto analytic = negative_loss(target, negatives, margin).grad;
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& x) { return negative_loss(x, negatives, margin).value; }, target, h);
        result.worst_negative = std::max(result.worst_negative, relative_error(analytic, numeric));
        ++result.checked;
      }
    }

    // L_Ins over a small batch of images, gradient w.r.t. every target feature.
    {
      std::vector<AlignmentImage> batch(3);
      std::vector<std::size_t> per_image{1, 0, 3};
      bool kink = false;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < per_image[i]; ++j) {
          AlignmentItem item;
          const auto t = random_vector(dim, rng);
          item.target = FeatureVector(t);
          const auto pos = draw_positives(t, k_pick(rng), rng);
          const auto neg = draw_negatives(t, k_pick(rng), margin, rng);
          kink = kink || near_positive_kink(t, pos) || near_negative_kink(t, neg, margin);
          item.retrieval.positives = pos;
          item.retrieval.negatives = neg;
          batch[i].items.push_back(std::move(item));
        }
      }
      if (kink) {
        ++result.skipped_near_kink;
      } else {
        std::vector<double> flat;
        for (const auto& image : batch) {
          for (const auto& item : image.items) flat.insert(flat.end(), item.target.values().begin(), item.target.values().end());
        }
        auto with_targets = [&](const std::vector<double>& x) {
          auto copy = batch;
          std::size_t at = 0;
          for (auto& image : copy) {
            for (auto& item : image.items) {
              item.target = FeatureVector(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(at),
                                                              x.begin() + static_cast<std::ptrdiff_t>(at + dim)));
              at += dim;
            }
          }
          return instance_alignment_loss(copy, margin).value;
        };
        const auto value = instance_alignment_loss(batch, margin);
        std::vector<double> analytic;
        for (const auto& g : value.grads) analytic.insert(analytic.end(), g.begin(), g.end());
        const auto numeric = numeric_gradient(with_targets, flat, h);
        result.worst_instance = std::max(result.worst_instance, relative_error(analytic, numeric));
        ++result.checked;
      }
    }

    // L_Dis, gradient w.r.t. parameters and w.r.t. each feature.
    {
      const std::size_t n = 6;
      std::vector<FeatureVector> features;
      std::vector<int> labels;
      for (std::size_t i = 0; i < n; ++i) {
        features.push_back(random_feature(dim, rng));
        labels.push_back(static_cast<int>(i % 2));
      }
      const auto params = random_vector(dim + 1, rng, 0.5);
      const auto value = discriminator_loss(features, labels, params);
      const auto numeric_params = numeric_gradient(
          [&](const std::vector<double>& p) { return discriminator_loss(features, labels, p).value; }, params, h);
      double worst = relative_error(value.grad_params, numeric_params);
      for (std::size_t i = 0; i < n; ++i) {
        const auto numeric = numeric_gradient(
            [&](const std::vector<double>& x) {
              auto copy = features;
              copy[i] = FeatureVector(x);
              return discriminator_loss(copy, labels, params).value;
            },
            features[i].values(), h);
        worst = std::max(worst, relative_error(value.grad_features[i], numeric));
      }
      result.worst_discriminator = std::max(result.worst_discriminator, worst);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace memalign::testing
