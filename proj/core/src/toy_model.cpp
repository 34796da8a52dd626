#include "memalign/toy_model.hpp"

#include <cmath>
#include <random>

namespace memalign {

ToyModel ToyModel::zeros(std::size_t input_dim, std::size_t feature_dim, std::size_t categories) {
  const auto in = static_cast<Eigen::Index>(input_dim);
  const auto feat = static_cast<Eigen::Index>(feature_dim);
  const auto cats = static_cast<Eigen::Index>(categories);
  ToyModel m;
  m.extractor_w = Eigen::MatrixXd::Zero(feat, in);
  m.extractor_b = Eigen::VectorXd::Zero(feat);
  m.classifier_w = Eigen::MatrixXd::Zero(cats, feat);
  m.classifier_b = Eigen::VectorXd::Zero(cats);
  m.discriminator = Eigen::VectorXd::Zero(feat + 1);
  return m;
}

ToyModel ToyModel::init(std::size_t input_dim, std::size_t feature_dim, std::size_t categories,
                        std::uint64_t seed) {
  ToyModel m = zeros(input_dim, feature_dim, categories);
  std::mt19937_64 rng(seed ^ 0x6d6f64656cULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double extractor_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double classifier_scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (Eigen::Index j = 0; j < m.extractor_w.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.extractor_w.rows(); ++i) m.extractor_w(i, j) = extractor_scale * normal(rng);
  }
  for (Eigen::Index j = 0; j < m.classifier_w.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.classifier_w.rows(); ++i) {
      m.classifier_w(i, j) = classifier_scale * normal(rng);
    }
  }
  // discriminator starts at zero, i.e. D = 0.5 everywhere
  return m;
}

ToyModel ToyModel::zeros_like() const { return zeros(input_dim(), feature_dim(), categories()); }

void ToyModel::add_scaled(double scale, const ToyModel& other) {
  extractor_w += scale * other.extractor_w;
  extractor_b += scale * other.extractor_b;
  classifier_w += scale * other.classifier_w;
  classifier_b += scale * other.classifier_b;
  discriminator += scale * other.discriminator;
}

bool ToyModel::all_finite() const {
  return extractor_w.allFinite() && extractor_b.allFinite() && classifier_w.allFinite() &&
         classifier_b.allFinite() && discriminator.allFinite();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

void MomentumSgd::step(ToyModel& model, const ToyModel& grads) {
  velocity_.extractor_w = momentum_ * velocity_.extractor_w + grads.extractor_w;
  velocity_.extractor_b = momentum_ * velocity_.extractor_b + grads.extractor_b;
  velocity_.classifier_w = momentum_ * velocity_.classifier_w + grads.classifier_w;
  velocity_.classifier_b = momentum_ * velocity_.classifier_b + grads.classifier_b;
  velocity_.discriminator = momentum_ * velocity_.discriminator + grads.discriminator;
  model.add_scaled(-learning_rate_, velocity_);
}

}  // namespace memalign
