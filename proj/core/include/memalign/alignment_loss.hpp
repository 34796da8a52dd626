#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "memalign/feature.hpp"
#include "memalign/retrieval.hpp"

namespace memalign {

struct LossWeights {
  double lambda1 = 1.0;  ///< unsupervised (pseudo-label) term
  double lambda2 = 0.1;  ///< domain discriminator term
  double lambda3 = 0.1;  ///< instance alignment term
  double margin = 1.0;   ///< hinge margin on negative distances

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  ///< d value / d target
};

/// Similarity-weighted pull toward retrieved positives:
///   (1/K) sum_k S(F, E_k) * |F - E_k|.
///
/// By default the gradient differentiates through both the similarity weight
/// and the distance. With `stop_similarity_gradient` the weights are held
/// constant. The distance gradient is taken as zero where F == E_k.
LossValue positive_loss(std::span<const double> target, std::span<const ScoredMatch> positives,
                        bool stop_similarity_gradient = false);

/// Hinge push away from negatives: mean over negatives of max(0, m - |F - E|).
/// Inactive hinges (distance >= m) contribute exactly zero. An empty
/// negative list yields zero.
LossValue negative_loss(std::span<const double> target, std::span<const NegativeSample> negatives,
                        double margin);

/// One aligned target instance with its retrieved pairs.
struct AlignmentItem {
  FeatureVector target;
  RetrievalResult retrieval;
};

/// Aligned instances of one target image.
struct AlignmentImage {
  std::vector<AlignmentItem> items;
};

struct InstanceLossValue {
  double value = 0.0;
  std::vector<std::vector<double>> grads;  ///< one per item, images flattened in order
  std::size_t images = 0;                  ///< images that contributed (non-empty)
  std::size_t instances = 0;
};

/// Mean over images of the mean over that image's instances of (L+ + L-).
/// Images without items do not count toward the outer mean; an empty batch
/// gives 0 and no gradients.
InstanceLossValue instance_alignment_loss(std::span<const AlignmentImage> batch, double margin,
                                          bool stop_similarity_gradient = false);

/// Logistic domain discriminator D(F) = sigmoid(w.F + b). Parameters are laid
/// out as [w_0 .. w_{d-1}, b].
struct DiscriminatorLoss {
  double value = 0.0;
  std::vector<double> grad_params;
  /// Ordinary d value / d F_i, one per input feature.
  std::vector<std::vector<double>> grad_features;
  /// What the extractor receives through the reversal layer: -grad_features.
  std::vector<std::vector<double>> grad_features_reversed;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy with domain labels (0 source, 1 target).
/// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log; a clamped
/// sample contributes no gradient.
DiscriminatorLoss discriminator_loss(std::span<const FeatureVector> features,
                                     std::span<const int> domain_labels,
                                     std::span<const double> disc_params);

struct LossBreakdown {
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_dis = 0.0;
  double l_ins = 0.0;
  double total = 0.0;
  std::size_t sup_instances = 0;
  std::size_t unsup_instances = 0;
  std::size_t dis_samples = 0;
  std::size_t ins_instances = 0;
};

/// total = l_sup + lambda1 l_unsup + lambda2 l_dis + lambda3 l_ins.
LossBreakdown combine(double l_sup, double l_unsup, double l_dis, double l_ins,
                      const LossWeights& weights);

}  // namespace memalign
