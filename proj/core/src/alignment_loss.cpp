#include "memalign/alignment_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "memalign/error.hpp"

namespace memalign {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("lambda1", "must be a non-negative number");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("lambda2", "must be a non-negative number");
  if (!(lambda3 >= 0.0) || !std::isfinite(lambda3)) throw ConfigError("lambda3", "must be a non-negative number");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin", "must be positive");
}

LossValue positive_loss(std::span<const double> target, std::span<const ScoredMatch> positives,
                        bool stop_similarity_gradient) {
  if (positives.empty()) throw InvalidInput("positive_loss needs at least one positive");
  const std::size_t dim = target.size();
  const double target_norm = l2_norm(target);
  const double inv_k = 1.0 / static_cast<double>(positives.size());

  LossValue out;
  out.grad.assign(dim, 0.0);
  for (const auto& match : positives) {
    const auto e = match.feature.view();
    if (e.size() != dim) throw InvalidInput("positive_loss: dimension mismatch");
    const double sim = cosine_similarity(target, e);
    const double dist = euclidean_distance(target, e);
    out.value += inv_k * sim * dist;

    const double e_norm = l2_norm(e);
    for (std::size_t i = 0; i < dim; ++i) {
      double g = 0.0;
      if (dist > 0.0) g += sim * (target[i] - e[i]) / dist;
      if (!stop_similarity_gradient) {
        const double dsim = e[i] / (target_norm * e_norm) - sim * target[i] / (target_norm * target_norm);
        g += dsim * dist;
      }
      out.grad[i] += inv_k * g;
    }
  }
  return out;
}

LossValue negative_loss(std::span<const double> target, std::span<const NegativeSample> negatives,
                        double margin) {
  if (!(margin > 0.0)) throw InvalidInput("negative_loss: margin must be positive");
  const std::size_t dim = target.size();
  LossValue out;
  out.grad.assign(dim, 0.0);
  if (negatives.empty()) return out;

  const double inv_n = 1.0 / static_cast<double>(negatives.size());
  for (const auto& neg : negatives) {
    const auto e = neg.feature.view();
    if (e.size() != dim) throw InvalidInput("negative_loss: dimension mismatch");
    const double dist = euclidean_distance(target, e);
    if (dist >= margin) continue;
    out.value += inv_n * (margin - dist);
    if (dist > 0.0) {
      for (std::size_t i = 0; i < dim; ++i) out.grad[i] -= inv_n * (target[i] - e[i]) / dist;
    }
  }
  return out;
}

InstanceLossValue instance_alignment_loss(std::span<const AlignmentImage> batch, double margin,
                                          bool stop_similarity_gradient) {
  InstanceLossValue out;
  for (const auto& image : batch) {
    if (!image.items.empty()) ++out.images;
  }
  if (out.images == 0) return out;

  const double inv_images = 1.0 / static_cast<double>(out.images);
  for (const auto& image : batch) {
    if (image.items.empty()) continue;
    const double inv_items = 1.0 / static_cast<double>(image.items.size());
    double image_sum = 0.0;
    for (const auto& item : image.items) {
      const auto pos = positive_loss(item.target.view(), item.retrieval.positives, stop_similarity_gradient);
      const auto neg = negative_loss(item.target.view(), item.retrieval.negatives, margin);
      image_sum += pos.value + neg.value;

      std::vector<double> grad(pos.grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = inv_images * inv_items * (pos.grad[i] + neg.grad[i]);
      }
      out.grads.push_back(std::move(grad));
      ++out.instances;
    }
    out.value += inv_images * inv_items * image_sum;
  }
  return out;
}

DiscriminatorLoss discriminator_loss(std::span<const FeatureVector> features,
                                     std::span<const int> domain_labels,
                                     std::span<const double> disc_params) {
  if (features.empty()) throw InvalidInput("discriminator_loss needs at least one feature");
  if (features.size() != domain_labels.size()) throw InvalidInput("discriminator_loss: label count mismatch");
  if (disc_params.empty()) throw InvalidInput("discriminator_loss: empty parameter vector");
  for (double p : disc_params) {
    if (!std::isfinite(p)) throw InvalidInput("discriminator_loss: non-finite parameter");
  }
  const std::size_t dim = disc_params.size() - 1;
  const auto weights = disc_params.first(dim);
  const double bias = disc_params[dim];
  const double inv_n = 1.0 / static_cast<double>(features.size());

  DiscriminatorLoss out;
  out.grad_params.assign(dim + 1, 0.0);
  out.grad_features.reserve(features.size());
  out.grad_features_reversed.reserve(features.size());
  for (std::size_t n = 0; n < features.size(); ++n) {
    const auto f = features[n].view();
    if (f.size() != dim) throw InvalidInput("discriminator_loss: feature dimension mismatch");
    const int label = domain_labels[n];
    if (label != 0 && label != 1) throw InvalidInput("discriminator_loss: domain label must be 0 or 1");

    const double logit = dot(weights, f) + bias;
    const double raw = 1.0 / (1.0 + std::exp(-logit));
    const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    out.value += inv_n * (label == 1 ? -std::log(p) : -std::log(1.0 - p));

    // d/dlogit of BCE is p - d; zero when the clamp is active.
    const double dlogit = (p == raw) ? inv_n * (p - static_cast<double>(label)) : 0.0;
    std::vector<double> gf(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      out.grad_params[i] += dlogit * f[i];
      gf[i] = dlogit * weights[i];
    }
    out.grad_params[dim] += dlogit;

    std::vector<double> reversed(dim);
    std::transform(gf.begin(), gf.end(), reversed.begin(), [](double g) { return -g; });
    out.grad_features.push_back(std::move(gf));
    out.grad_features_reversed.push_back(std::move(reversed));
  }
  return out;
}

LossBreakdown combine(double l_sup, double l_unsup, double l_dis, double l_ins, const LossWeights& weights) {
  const auto check = [](double v, const char* name) {
    if (!std::isfinite(v)) throw InvalidInput(std::string("combine: non-finite ") + name);
  };
  check(l_sup, "l_sup");
  check(l_unsup, "l_unsup");
  check(l_dis, "l_dis");
  check(l_ins, "l_ins");

  LossBreakdown b;
  b.l_sup = l_sup;
  b.l_unsup = l_unsup;
  b.l_dis = l_dis;
  b.l_ins = l_ins;
  b.total = l_sup + weights.lambda1 * l_unsup + weights.lambda2 * l_dis + weights.lambda3 * l_ins;
  return b;
}

}  // namespace memalign
