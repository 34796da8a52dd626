#include "memalign/feature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "memalign/error.hpp"

namespace memalign {

bool FeatureVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

void require_valid(const FeatureVector& v, std::size_t dim, const char* what) {
  if (v.dim() != dim) {
    throw InvalidInput(std::string(what) + ": dimension " + std::to_string(v.dim()) +
                       " does not match expected " + std::to_string(dim));
  }
  if (!v.all_finite()) {
    throw InvalidInput(std::string(what) + ": non-finite component");
  }
}

}  // namespace memalign
