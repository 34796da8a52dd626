#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace memalign {

/// Affine feature extractor, softmax classifier head and logistic domain
/// discriminator. The same struct carries gradients and momentum buffers.
struct ToyModel {
  Eigen::MatrixXd extractor_w;   ///< feature_dim x input_dim
  Eigen::VectorXd extractor_b;   ///< feature_dim
  Eigen::MatrixXd classifier_w;  ///< C x feature_dim
  Eigen::VectorXd classifier_b;  ///< C
  Eigen::VectorXd discriminator; ///< [w (feature_dim), b]

  static ToyModel init(std::size_t input_dim, std::size_t feature_dim, std::size_t categories,
                       std::uint64_t seed);
  static ToyModel zeros(std::size_t input_dim, std::size_t feature_dim, std::size_t categories);
  ToyModel zeros_like() const;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(extractor_w.cols()); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(extractor_w.rows()); }
  std::size_t categories() const noexcept { return static_cast<std::size_t>(classifier_w.rows()); }

  Eigen::VectorXd extract(const Eigen::VectorXd& input) const { return extractor_w * input + extractor_b; }
  Eigen::VectorXd logits(const Eigen::VectorXd& feature) const {
    return classifier_w * feature + classifier_b;
  }

  /// this += scale * other, parameter-wise.
  void add_scaled(double scale, const ToyModel& other);
  bool all_finite() const;
};

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Heavy-ball SGD: v = mu v + g; theta -= lr v. No decay.
class MomentumSgd {
 public:
  MomentumSgd(const ToyModel& shape, double learning_rate, double momentum)
      : velocity_(shape.zeros_like()), learning_rate_(learning_rate), momentum_(momentum) {}

  void step(ToyModel& model, const ToyModel& grads);

 private:
  ToyModel velocity_;
  double learning_rate_;
  double momentum_;
};

}  // namespace memalign
