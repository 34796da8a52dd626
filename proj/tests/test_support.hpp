#pragma once

#include <cmath>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "memalign/feature.hpp"
#include "memalign/memory_bank.hpp"
#include "memalign/retrieval.hpp"

namespace memalign::testing {

inline std::vector<double> random_vector(std::size_t dim, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

inline FeatureVector random_feature(std::size_t dim, Rng& rng, double scale = 1.0) {
  return FeatureVector(random_vector(dim, rng, scale));
}

/// Central differences of f at x, step h.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|) in the Euclidean norm; 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Every slot holds `per_category` random vectors.
inline MemoryBank random_bank(std::size_t categories, std::size_t dim, std::size_t per_category, Rng& rng) {
  MemoryBank bank(categories, dim, StoragePolicy{}, std::vector<std::size_t>(categories, per_category));
  for (std::size_t c = 0; c < categories; ++c) {
    for (std::size_t i = 0; i < per_category; ++i) {
      InstanceRecord r{random_feature(dim, rng), static_cast<int>(c), static_cast<int>(c), c, static_cast<std::uint32_t>(i)};
      bank.insert_filtered(r);
    }
  }
  return bank;
}

struct OracleMatch {
  std::size_t index;
  double similarity;
};

/// Exhaustive scan of one slot: cosine of every stored vector against the
/// query, stable-sorted by similarity descending, first k kept.
inline std::vector<OracleMatch> linear_scan(const MemoryBank& bank, const std::vector<double>& query,
                                            int category, std::size_t k) {
  double qq = 0.0;
  for (double x : query) qq += x * x;
  const double qn = std::sqrt(qq);
  const auto slot = bank.slot(category);
  std::vector<OracleMatch> all;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    double d = 0.0;
    double vv = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      d += query[j] * slot[i][j];
      vv += slot[i][j] * slot[i][j];
    }
    const double vn = std::sqrt(vv);
    const double s = vn > 0.0 ? std::clamp(d / (qn * vn), -1.0, 1.0) : 0.0;
    all.push_back({i, s});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const OracleMatch& a, const OracleMatch& b) { return a.similarity > b.similarity; });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace memalign::testing
