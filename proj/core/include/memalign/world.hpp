#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "memalign/retrieval.hpp"

namespace memalign {

enum class Domain : std::uint8_t { Source = 0, Target = 1 };

/// Knobs for the synthetic domain-shift world.
struct WorldParams {
  std::size_t categories = 20;
  std::size_t input_dim = 32;
  std::size_t feature_dim = kDefaultFeatureDim;
  double zipf_exponent = 1.2;     ///< 0 gives uniform class frequencies
  double mean_scale = 1.0;        ///< per-component std of the class means
  double class_spread = 1.0;      ///< per-component std of instance noise around a mode
  std::size_t modes_per_class = 1;
  double mode_scale = 0.0;        ///< per-component std of mode offsets from the class mean
  double rotation_strength = 0.0; ///< scale of the skew generator of the target rotation
  std::size_t rotation_rank = 0;  ///< dimension of the rotated subspace; 0 rotates all of input_dim
  double shift_norm = 0.0;        ///< length of the target translation
  double target_noise = 0.1;      ///< target-only noise std, relative to class_spread

  void validate() const;

  friend bool operator==(const WorldParams&, const WorldParams&) = default;
};

/// Concrete world drawn from `WorldParams` and a seed.
struct SyntheticWorld {
  WorldParams params;
  std::uint64_t seed = 0;
  Eigen::MatrixXd class_means;             ///< input_dim x C
  std::vector<Eigen::MatrixXd> mode_means; ///< per class, input_dim x modes
  std::vector<double> class_spread;        ///< per category
  Eigen::MatrixXd shift_matrix;            ///< A, input_dim x input_dim
  Eigen::VectorXd shift_offset;            ///< t
  std::vector<double> class_frequencies;

  std::size_t categories() const noexcept { return params.categories; }
};

/// p_c proportional to (c + 1)^-s over c in [0, C).
std::vector<double> zipf_frequencies(std::size_t categories, double exponent);

SyntheticWorld make_world(const WorldParams& params, std::uint64_t seed);

struct SyntheticInstance {
  Eigen::VectorXd input;
  int category = 0;
  BBox box;
};

struct SyntheticImage {
  std::uint64_t image_id = 0;
  Domain domain = Domain::Source;
  std::vector<SyntheticInstance> instances;
};

/// Draws `n_images` images with a uniform instance count in
/// [min_instances, max_instances] and Zipf-distributed categories.
/// Target inputs are mapped through (A, t) plus target noise. Deterministic in
/// (world.seed, domain, draw_counter).
std::vector<SyntheticImage> generate_batch(const SyntheticWorld& world, Domain domain,
                                           std::size_t n_images, std::size_t min_instances,
                                           std::size_t max_instances, std::uint64_t draw_counter);

/// `per_category` single-instance images of every category, in category order.
std::vector<SyntheticImage> generate_balanced_set(const SyntheticWorld& world, Domain domain,
                                                  std::size_t per_category, std::uint64_t draw_counter);

}  // namespace memalign
