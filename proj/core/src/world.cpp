#include "memalign/world.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "memalign/error.hpp"

namespace memalign {

namespace {

Rng stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(counter),
                    static_cast<std::uint32_t>(counter >> 32)};
  return Rng(seq);
}

constexpr std::uint64_t kWorldStream = 0x57;
constexpr std::uint64_t kSourceStream = 0x53;
constexpr std::uint64_t kTargetStream = 0x54;

Eigen::VectorXd gaussian(std::size_t n, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = stddev * normal(rng);
  return v;
}

BBox random_box(Rng& rng) {
  std::uniform_real_distribution<double> size(0.1, 0.4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = size(rng);
  const double h = size(rng);
  const double x1 = unit(rng) * (1.0 - w);
  const double y1 = unit(rng) * (1.0 - h);
  return {x1, y1, x1 + w, y1 + h};
}

SyntheticInstance draw_instance(const SyntheticWorld& world, Domain domain, int category, Rng& rng) {
  const auto& p = world.params;
  const auto& modes = world.mode_means[static_cast<std::size_t>(category)];
  std::uniform_int_distribution<Eigen::Index> pick_mode(0, modes.cols() - 1);
  const double spread = world.class_spread[static_cast<std::size_t>(category)];

  SyntheticInstance inst;
  inst.category = category;
  inst.input = modes.col(pick_mode(rng)) + gaussian(p.input_dim, spread, rng);
  if (domain == Domain::Target) {
    inst.input = world.shift_matrix * inst.input + world.shift_offset +
                 gaussian(p.input_dim, p.target_noise * spread, rng);
  }
  inst.box = random_box(rng);
  return inst;
}

}  // namespace

void WorldParams::validate() const {
  if (categories < 2) throw ConfigError("categories", "at least two categories are required");
  if (input_dim == 0) throw ConfigError("input_dim", "must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim", "must be positive");
  if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent", "must be non-negative");
  if (!(mean_scale >= 0.0)) throw ConfigError("mean_scale", "must be non-negative");
  if (!(class_spread >= 0.0)) throw ConfigError("class_spread", "must be non-negative");
  if (modes_per_class == 0) throw ConfigError("modes_per_class", "must be at least 1");
  if (!(mode_scale >= 0.0)) throw ConfigError("mode_scale", "must be non-negative");
  if (!(rotation_strength >= 0.0)) throw ConfigError("rotation_strength", "must be non-negative");
  if (rotation_rank > input_dim) throw ConfigError("rotation_rank", "cannot exceed input_dim");
  if (!(shift_norm >= 0.0)) throw ConfigError("shift_norm", "must be non-negative");
  if (!(target_noise >= 0.0)) throw ConfigError("target_noise", "must be non-negative");
}

std::vector<double> zipf_frequencies(std::size_t categories, double exponent) {
  std::vector<double> freq(categories);
  for (std::size_t c = 0; c < categories; ++c) {
    freq[c] = std::pow(static_cast<double>(c + 1), -exponent);
  }
  const double norm = std::accumulate(freq.begin(), freq.end(), 0.0);
  for (double& f : freq) f /= norm;
  return freq;
}

SyntheticWorld make_world(const WorldParams& params, std::uint64_t seed) {
  params.validate();
  SyntheticWorld world;
  world.params = params;
  world.seed = seed;
  Rng rng = stream_rng(seed, kWorldStream, 0);

  const auto d = static_cast<Eigen::Index>(params.input_dim);
  const auto c_count = static_cast<Eigen::Index>(params.categories);
  world.class_means.resize(d, c_count);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    world.class_means.col(c) = gaussian(params.input_dim, params.mean_scale, rng);
  }
  world.mode_means.reserve(params.categories);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    Eigen::MatrixXd modes(d, static_cast<Eigen::Index>(params.modes_per_class));
    for (Eigen::Index m = 0; m < modes.cols(); ++m) {
      modes.col(m) = world.class_means.col(c);
      if (params.modes_per_class > 1) modes.col(m) += gaussian(params.input_dim, params.mode_scale, rng);
    }
    world.mode_means.push_back(std::move(modes));
  }
  world.class_spread.assign(params.categories, params.class_spread);

  // Cayley transform of a random skew-symmetric generator is an exact rotation;
  // it acts on a random rank-r subspace and leaves the complement fixed.
  const Eigen::Index rank =
      params.rotation_rank == 0 ? d : static_cast<Eigen::Index>(params.rotation_rank);
  Eigen::MatrixXd g(rank, rank);
  for (Eigen::Index i = 0; i < rank; ++i) g.col(i) = gaussian(static_cast<std::size_t>(rank), 1.0, rng);
  const Eigen::MatrixXd skew =
      params.rotation_strength * (g - g.transpose()) / std::sqrt(2.0 * static_cast<double>(rank));
  const Eigen::MatrixXd eye_r = Eigen::MatrixXd::Identity(rank, rank);
  const Eigen::MatrixXd rotation = (eye_r + skew).partialPivLu().solve(eye_r - skew);
  Eigen::MatrixXd raw_basis(d, rank);
  for (Eigen::Index i = 0; i < rank; ++i) raw_basis.col(i) = gaussian(params.input_dim, 1.0, rng);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(raw_basis).householderQ() *
                                Eigen::MatrixXd::Identity(d, rank);
  world.shift_matrix = Eigen::MatrixXd::Identity(d, d) + basis * (rotation - eye_r) * basis.transpose();

  Eigen::VectorXd direction = gaussian(params.input_dim, 1.0, rng);
  world.shift_offset = params.shift_norm * direction / direction.norm();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(world.shift_matrix);
  const auto& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > 0.0) || sv[0] / sv[sv.size() - 1] >= 1e6) {
    throw ConfigError("rotation_strength", "domain map is ill-conditioned");
  }

  world.class_frequencies = zipf_frequencies(params.categories, params.zipf_exponent);
  return world;
}

std::vector<SyntheticImage> generate_batch(const SyntheticWorld& world, Domain domain,
                                           std::size_t n_images, std::size_t min_instances,
                                           std::size_t max_instances, std::uint64_t draw_counter) {
  if (n_images == 0) throw InvalidInput("generate_batch: n_images must be at least 1");
  if (min_instances == 0 || min_instances > max_instances) {
    throw InvalidInput("generate_batch: invalid instances-per-image range");
  }
  Rng rng = stream_rng(world.seed, domain == Domain::Source ? kSourceStream : kTargetStream, draw_counter);
  std::discrete_distribution<int> pick_category(world.class_frequencies.begin(),
                                                world.class_frequencies.end());
  std::uniform_int_distribution<std::size_t> pick_count(min_instances, max_instances);

  std::vector<SyntheticImage> images(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    images[i].image_id = i;
    images[i].domain = domain;
    const std::size_t count = pick_count(rng);
    for (std::size_t j = 0; j < count; ++j) {
      images[i].instances.push_back(draw_instance(world, domain, pick_category(rng), rng));
    }
  }
  return images;
}

std::vector<SyntheticImage> generate_balanced_set(const SyntheticWorld& world, Domain domain,
                                                  std::size_t per_category, std::uint64_t draw_counter) {
  Rng rng = stream_rng(world.seed, domain == Domain::Source ? kSourceStream : kTargetStream, draw_counter);
  std::vector<SyntheticImage> images;
  images.reserve(per_category * world.categories());
  for (std::size_t c = 0; c < world.categories(); ++c) {
    for (std::size_t n = 0; n < per_category; ++n) {
      SyntheticImage image;
      image.image_id = images.size();
      image.domain = domain;
      image.instances.push_back(draw_instance(world, domain, static_cast<int>(c), rng));
      images.push_back(std::move(image));
    }
  }
  return images;
}

}  // namespace memalign
