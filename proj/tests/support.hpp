#pragma once

// Shared helpers for the test suites: independent oracles (finite
// differences, straight-line re-implementations) and small generators. These
// deliberately avoid the library's forward/gradient code paths wherever they
// act as the checking side of a comparison.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mtbkd/dataset.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/rng.hpp"
#include "mtbkd/teacher.hpp"

namespace testsupport {

// Central finite differences of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> theta, double step = 1e-5) {
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double hi = f(theta);
    theta[i] = orig - step;
    const double lo = f(theta);
    theta[i] = orig;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline std::vector<double> random_simplex_point(mtbkd::Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double total = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> random_theta(mtbkd::Rng& rng, std::size_t n, double scale = 0.8) {
  std::vector<double> theta(n);
  for (double& v : theta) v = rng.uniform(-scale, scale);
  return theta;
}

inline mtbkd::LabeledDataset random_dataset(mtbkd::Rng& rng, std::size_t n, std::size_t m, int k,
                                            bool with_probs = false, bool with_domains = false) {
  mtbkd::LabeledDataset ds;
  ds.num_classes = k;
  ds.features = mtbkd::Matrix(n, m);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) ds.features(i, j) = rng.uniform(-2.0, 2.0);
    ds.labels[i] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
  }
  if (with_probs) {
    ds.true_probs = mtbkd::Matrix(n, static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = random_simplex_point(rng, static_cast<std::size_t>(k));
      for (int c = 0; c < k; ++c) ds.true_probs(i, static_cast<std::size_t>(c)) = p[static_cast<std::size_t>(c)];
    }
  }
  if (with_domains) {
    ds.domain_tags.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      ds.domain_tags[i] = 1 + static_cast<int>(rng.uniform_index(3));
    }
  }
  return ds;
}

inline mtbkd::TeacherPredictionSet random_prediction_set(mtbkd::Rng& rng, std::size_t n,
                                                         std::size_t g, std::size_t k,
                                                         mtbkd::WeightingMode mode) {
  mtbkd::TeacherPredictionSet set;
  set.mode = mode;
  set.probs.assign(g, mtbkd::Matrix(n, k));
  set.weights = mtbkd::Matrix(n, g);
  std::vector<std::span<const double>> rows(g);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < g; ++t) {
      const auto p = random_simplex_point(rng, k);
      for (std::size_t c = 0; c < k; ++c) set.probs[t](i, c) = p[c];
    }
    for (std::size_t t = 0; t < g; ++t) rows[t] = set.probs[t].row(i);
    const auto w = mtbkd::compute_weights(rows, mode);
    for (std::size_t t = 0; t < g; ++t) set.weights(i, t) = w[t];
  }
  return set;
}

}  // namespace testsupport
