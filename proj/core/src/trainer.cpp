#include "memalign/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "memalign/error.hpp"

namespace memalign {

namespace {

FeatureVector to_feature(const Eigen::VectorXd& v) {
  return FeatureVector(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::Map<const Eigen::VectorXd> as_eigen(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

struct ForwardCache {
  std::vector<std::vector<Eigen::VectorXd>> features;  // [image][instance]
  std::vector<std::vector<Eigen::VectorXd>> probs;
};

ForwardCache forward(const ToyModel& model, std::span<const SyntheticImage> images) {
  ForwardCache cache;
  cache.features.resize(images.size());
  cache.probs.resize(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& inst : images[i].instances) {
      Eigen::VectorXd f = model.extract(inst.input);
      cache.probs[i].push_back(softmax(model.logits(f)));
      cache.features[i].push_back(std::move(f));
    }
  }
  return cache;
}

// Cross-entropy backprop for one instance; `scale` already folds in the
// term weight and the 1/N of the mean.
void accumulate_cross_entropy(const ToyModel& model, const Eigen::VectorXd& input,
                              const Eigen::VectorXd& feature, const Eigen::VectorXd& probs,
                              int label, double scale, ToyModel& grads) {
  Eigen::VectorXd dz = probs;
  dz[label] -= 1.0;
  dz *= scale;
  grads.classifier_w.noalias() += dz * feature.transpose();
  grads.classifier_b += dz;
  const Eigen::VectorXd dfeature = model.classifier_w.transpose() * dz;
  grads.extractor_w.noalias() += dfeature * input.transpose();
  grads.extractor_b += dfeature;
}

void accumulate_feature_grad(const Eigen::VectorXd& input, const Eigen::VectorXd& dfeature,
                             ToyModel& grads) {
  grads.extractor_w.noalias() += dfeature * input.transpose();
  grads.extractor_b += dfeature;
}

std::vector<std::vector<Detection>> pseudo_label_cached(std::span<const SyntheticImage> images,
                                                        const ForwardCache& cache,
                                                        const ThresholdTable& thresholds,
                                                        double iou_threshold) {
  std::vector<std::vector<Detection>> kept(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<Detection> dets;
    for (std::size_t j = 0; j < images[i].instances.size(); ++j) {
      Eigen::Index best = 0;
      const double score = cache.probs[i][j].maxCoeff(&best);
      dets.push_back({images[i].instances[j].box, static_cast<int>(best), score, j});
    }
    kept[i] = filter_detections(dets, thresholds, iou_threshold);
  }
  return kept;
}

struct AlignmentBatch {
  std::vector<AlignmentImage> images;
  std::vector<const Eigen::VectorXd*> inputs;  // flattened, aligned with loss grads
};

AlignmentBatch build_alignment_batch(const ForwardCache& cache, const MemoryBank& bank,
                                     std::span<const SyntheticImage> target,
                                     std::span<const std::vector<Detection>> kept, std::size_t k,
                                     Rng& rng, StepLog* log) {
  AlignmentBatch batch;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    AlignmentImage image;
    for (const auto& det : kept[i]) {
      if (bank.size(det.category) == 0) {
        if (log) ++log->memory_misses;
        continue;
      }
      const auto& f = cache.features[i][det.tag];
      AlignmentItem item{to_feature(f), retrieve(bank, to_feature(f), det.category, k, rng)};
      if (log) {
        for (const auto& p : item.retrieval.positives) {
          log->similarity_sum += p.similarity;
          log->similarity_min = std::min(log->similarity_min, p.similarity);
          ++log->similarity_count;
        }
      }
      batch.inputs.push_back(&target[i].instances[det.tag].input);
      image.items.push_back(std::move(item));
    }
    batch.images.push_back(std::move(image));
  }
  return batch;
}

void require_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    throw NonFiniteLoss(std::string("non-finite ") + term + " = " + std::to_string(value));
  }
}

}  // namespace

std::size_t TrainSchedule::rebuilds_per_epoch() const {
  return static_cast<std::size_t>(std::llround(1.0 / memory_update_fraction));
}

void TrainSchedule::validate() const {
  if (!(memory_update_fraction > 0.0 && memory_update_fraction <= 1.0)) {
    throw ConfigError("memory_update_fraction", "must lie in (0, 1]");
  }
  if (batch_size < 2) throw ConfigError("batch_size", "needs at least one source and one target image");
  if (burn_in_epochs > epochs) throw ConfigError("burn_in_epochs", "cannot exceed epochs");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (top_k == 0) throw ConfigError("K", "must be at least 1");
  if (!(base_delta > 0.0 && base_delta < 1.0)) throw ConfigError("base_delta", "must lie in (0, 1)");
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw ConfigError("nms_iou", "must lie in (0, 1)");
  weights.validate();
  storage.validate();
}

std::vector<std::vector<Detection>> pseudo_label(const ToyModel& model,
                                                 std::span<const SyntheticImage> target_images,
                                                 const ThresholdTable& thresholds, double iou_threshold) {
  return pseudo_label_cached(target_images, forward(model, target_images), thresholds, iou_threshold);
}

ObjectiveResult compute_objective(const ToyModel& model, const MemoryBank& bank,
                                  std::span<const SyntheticImage> source,
                                  std::span<const SyntheticImage> target,
                                  const ThresholdTable& thresholds, const TrainSchedule& schedule,
                                  bool adapt, Rng& retrieval_rng) {
  const auto& w = schedule.weights;
  ObjectiveResult out;
  out.grads = model.zeros_like();
  out.log.adapted = adapt;
  auto& grads = out.grads;

  // Supervised source cross-entropy.
  const auto src = forward(model, source);
  std::size_t n_src = 0;
  std::vector<int> source_categories;
  for (const auto& image : source) {
    for (const auto& inst : image.instances) source_categories.push_back(inst.category);
    n_src += image.instances.size();
  }
  double l_sup = 0.0;
  if (n_src > 0) {
    const double scale = 1.0 / static_cast<double>(n_src);
    for (std::size_t i = 0; i < source.size(); ++i) {
      for (std::size_t j = 0; j < source[i].instances.size(); ++j) {
        const int label = source[i].instances[j].category;
        l_sup -= scale * std::log(std::max(src.probs[i][j][label], 1e-300));
        accumulate_cross_entropy(model, source[i].instances[j].input, src.features[i][j],
                                 src.probs[i][j], label, scale, grads);
      }
    }
  }

  double l_unsup = 0.0;
  double l_dis = 0.0;
  double l_ins = 0.0;
  std::size_t n_kept = 0;
  std::size_t n_dis = 0;
  std::size_t n_ins = 0;

  if (adapt) {
    const auto tgt = forward(model, target);
    const auto kept = pseudo_label_cached(target, tgt, thresholds, schedule.nms_iou);

    // Self-training on confident target predictions.
    std::vector<int> pseudo_categories;
    for (const auto& dets : kept) {
      for (const auto& d : dets) pseudo_categories.push_back(d.category);
    }
    n_kept = pseudo_categories.size();
    out.log.filtered_targets = n_kept;
    if (n_kept > 0) {
      out.log.has_match_rate = true;
      out.log.minibatch_match_rate = minibatch_match_rate(source_categories, pseudo_categories);
      const double scale = 1.0 / static_cast<double>(n_kept);
      for (std::size_t i = 0; i < target.size(); ++i) {
        for (const auto& d : kept[i]) {
          l_unsup -= scale * std::log(std::max(tgt.probs[i][d.tag][d.category], 1e-300));
          if (w.lambda1 > 0.0) {
            accumulate_cross_entropy(model, target[i].instances[d.tag].input, tgt.features[i][d.tag],
                                     tgt.probs[i][d.tag], d.category, w.lambda1 * scale, grads);
          }
        }
      }
    }

    // Image-level domain discriminator on pooled features, through the GRL.
    std::vector<FeatureVector> pooled;
    std::vector<int> domains;
    std::vector<std::pair<std::span<const SyntheticImage>, const ForwardCache*>> sides = {
        {source, &src}, {target, &tgt}};
    for (int side = 0; side < 2; ++side) {
      const auto& [images, cache] = sides[static_cast<std::size_t>(side)];
      for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].instances.empty()) continue;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.feature_dim()));
        for (const auto& f : cache->features[i]) mean += f;
        mean /= static_cast<double>(images[i].instances.size());
        pooled.push_back(to_feature(mean));
        domains.push_back(side);
      }
    }
    if (!pooled.empty()) {
      const auto disc_params = std::vector<double>(model.discriminator.data(),
                                                model.discriminator.data() + model.discriminator.size());
      const auto dis = discriminator_loss(pooled, domains, disc_params);
      l_dis = dis.value;
      n_dis = pooled.size();
      if (w.lambda2 > 0.0) {
        grads.discriminator += w.lambda2 * as_eigen(dis.grad_params);
        std::size_t n = 0;
        for (int side = 0; side < 2; ++side) {
          const auto& [images, cache] = sides[static_cast<std::size_t>(side)];
          for (const auto& image : images) {
            if (image.instances.empty()) continue;
            const double share = w.lambda2 / static_cast<double>(image.instances.size());
            const Eigen::VectorXd g = share * as_eigen(dis.grad_features_reversed[n++]);
            for (const auto& inst : image.instances) accumulate_feature_grad(inst.input, g, grads);
          }
        }
      }
    }

    // Memory-based instance alignment.
    out.log.bank_fully_populated = bank.all_populated();
    out.log.alignment_skipped = bank.total_size() == 0;
    if (!out.log.alignment_skipped) {
      const auto batch = build_alignment_batch(tgt, bank, target, kept, schedule.top_k, retrieval_rng, &out.log);
      const auto ins = instance_alignment_loss(batch.images, w.margin, schedule.stop_similarity_gradient);
      l_ins = ins.value;
      n_ins = ins.instances;
      out.log.aligned = ins.instances;
      if (w.lambda3 > 0.0) {
        for (std::size_t n = 0; n < ins.grads.size(); ++n) {
          accumulate_feature_grad(*batch.inputs[n], w.lambda3 * as_eigen(ins.grads[n]), grads);
        }
      }
    } else {
      out.log.memory_misses = n_kept;
    }
  }

  require_finite(l_sup, "l_sup");
  require_finite(l_unsup, "l_unsup");
  require_finite(l_dis, "l_dis");
  require_finite(l_ins, "l_ins");
  out.breakdown = combine(l_sup, l_unsup, l_dis, l_ins, w);
  out.breakdown.sup_instances = n_src;
  out.breakdown.unsup_instances = n_kept;
  out.breakdown.dis_samples = n_dis;
  out.breakdown.ins_instances = n_ins;
  return out;
}

ObjectiveResult train_step(ToyModel& model, MomentumSgd& optimizer, const MemoryBank& bank,
                           std::span<const SyntheticImage> source,
                           std::span<const SyntheticImage> target,
                           const ThresholdTable& thresholds, const TrainSchedule& schedule,
                           bool adapt, Rng& retrieval_rng) {
  auto result = compute_objective(model, bank, source, target, thresholds, schedule, adapt, retrieval_rng);
  if (!result.grads.all_finite()) throw NonFiniteLoss("non-finite gradient");
  optimizer.step(model, result.grads);
  if (!model.all_finite()) throw NonFiniteLoss("parameters diverged after update");
  return result;
}

double evaluate_instance_loss(const ToyModel& model, const MemoryBank& bank,
                              std::span<const SyntheticImage> target,
                              std::span<const std::vector<Detection>> kept,
                              const TrainSchedule& schedule, Rng& retrieval_rng) {
  const auto cache = forward(model, target);
  const auto batch = build_alignment_batch(cache, bank, target, kept, schedule.top_k, retrieval_rng, nullptr);
  return instance_alignment_loss(batch.images, schedule.weights.margin, schedule.stop_similarity_gradient).value;
}

AccuracyReport evaluate_accuracy(const ToyModel& model, std::span<const SyntheticImage> images) {
  AccuracyReport report;
  const std::size_t cats = model.categories();
  report.per_category.assign(cats, 0.0);
  report.counts.assign(cats, 0);
  std::vector<std::size_t> correct(cats, 0);
  std::size_t total = 0;
  std::size_t total_correct = 0;
  for (const auto& image : images) {
    for (const auto& inst : image.instances) {
      Eigen::Index best = 0;
      model.logits(model.extract(inst.input)).maxCoeff(&best);
      const auto c = static_cast<std::size_t>(inst.category);
      ++report.counts[c];
      ++total;
      if (best == inst.category) {
        ++correct[c];
        ++total_correct;
      }
    }
  }
  std::size_t present = 0;
  for (std::size_t c = 0; c < cats; ++c) {
    if (report.counts[c] == 0) continue;
    report.per_category[c] = static_cast<double>(correct[c]) / static_cast<double>(report.counts[c]);
    report.macro += report.per_category[c];
    ++present;
  }
  if (present > 0) report.macro /= static_cast<double>(present);
  if (total > 0) report.overall = static_cast<double>(total_correct) / static_cast<double>(total);
  return report;
}

}  // namespace memalign
