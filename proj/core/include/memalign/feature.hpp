#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace memalign {

/// Default instance-feature dimension used by the simulator.
inline constexpr std::size_t kDefaultFeatureDim = 64;

/// Fixed-dimension real vector standing in for an ROI-pooled instance feature.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {}
  FeatureVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> view() const noexcept { return values_; }
  std::span<double> mutable_view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const noexcept;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Throws InvalidInput unless `v` has dimension `dim` and only finite components.
void require_valid(const FeatureVector& v, std::size_t dim, const char* what);

}  // namespace memalign
