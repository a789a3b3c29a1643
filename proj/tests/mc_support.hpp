#pragma once

// Monte-Carlo statistics helpers for the sampler tests: KS test against the
// standard normal, kernel-density peak finding, one-parameter EM for a known
// two-component mixture, and small synthetic sampling targets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mtbkd/linalg.hpp"
#include "mtbkd/rng.hpp"

namespace testsupport {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic against N(0,1).
inline double ks_statistic_normal(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = std_normal_cdf(xs[i]);
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
  }
  return d;
}

// Asymptotic 1% critical value: reject when D * sqrt(n) > 1.6276.
inline bool ks_pass_1pct(std::span<const double> xs) {
  std::vector<double> copy(xs.begin(), xs.end());
  const double d = ks_statistic_normal(std::move(copy));
  return d * std::sqrt(static_cast<double>(xs.size())) <= 1.6276;
}

// Gaussian KDE on a grid; returns the grid positions of local maxima whose
// height exceeds `prominence` times the global maximum.
inline std::vector<double> kde_peaks(std::span<const double> samples, double lo, double hi,
                                     std::size_t grid_points = 400, double prominence = 0.1) {
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(samples.size() - 1);
  const double h =
      1.06 * std::sqrt(var) * std::pow(static_cast<double>(samples.size()), -0.2);

  std::vector<double> grid(grid_points), density(grid_points, 0.0);
  for (std::size_t i = 0; i < grid_points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
  }
  for (double v : samples) {
    for (std::size_t i = 0; i < grid_points; ++i) {
      const double z = (grid[i] - v) / h;
      density[i] += std::exp(-0.5 * z * z);
    }
  }
  const double peak = *std::max_element(density.begin(), density.end());
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < grid_points; ++i) {
    if (density[i] > density[i - 1] && density[i] >= density[i + 1] &&
        density[i] > prominence * peak) {
      peaks.push_back(grid[i]);
    }
  }
  return peaks;
}

// MLE of the weight of component one in a two-Gaussian mixture with known
// component parameters, via EM on the weight alone.
inline double em_mixture_weight(std::span<const double> samples, double mu1, double mu2,
                                double var) {
  double w = 0.5;
  for (int iter = 0; iter < 200; ++iter) {
    double acc = 0.0;
    for (double x : samples) {
      const double f1 = std::exp(-0.5 * (x - mu1) * (x - mu1) / var);
      const double f2 = std::exp(-0.5 * (x - mu2) * (x - mu2) / var);
      acc += w * f1 / (w * f1 + (1.0 - w) * f2);
    }
    const double next = acc / static_cast<double>(samples.size());
    if (std::abs(next - w) < 1e-12) return next;
    w = next;
  }
  return w;
}

// Sampling target with an identically zero gradient: the chain becomes a
// pure Gaussian random walk.
struct ZeroGradTarget {
  std::size_t dim = 1;
  std::size_t n = 16;
  std::size_t param_dim() const { return dim; }
  std::size_t data_size() const { return n; }
  std::vector<double> grad_log_posterior(std::span<const double>,
                                         std::span<const std::size_t>) const {
    return std::vector<double>(dim, 0.0);
  }
};

// Two-parameter logistic regression target (one weight, one bias) with K = 2
// realized through the complementary output probability; no teacher term.
struct BinaryLogisticTarget {
  std::vector<double> x;
  std::vector<int> y;  // 1 for the positive class

  static BinaryLogisticTarget make(std::size_t n, std::uint64_t seed) {
    mtbkd::Rng rng(seed);
    BinaryLogisticTarget t;
    t.x.resize(n);
    t.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.x[i] = rng.uniform(-2.0, 2.0);
      const double p = 1.0 / (1.0 + std::exp(-(1.2 * t.x[i] - 0.4)));
      t.y[i] = rng.uniform() < p ? 1 : 0;
    }
    return t;
  }

  std::size_t param_dim() const { return 2; }
  std::size_t data_size() const { return x.size(); }

  double log_posterior(std::span<const double> theta) const {
    const double w = theta[0], b = theta[1];
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = w * x[i] + b;
      // log sigma(z) and log(1 - sigma(z)) in a stable form
      const double log_p = z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
      const double log_q = z >= 0.0 ? -z - std::log1p(std::exp(-z)) : -std::log1p(std::exp(z));
      total += y[i] == 1 ? log_p : log_q;
    }
    return total;
  }

  std::vector<double> grad_log_posterior(std::span<const double> theta,
                                         std::span<const std::size_t> batch) const {
    const double w = theta[0], b = theta[1];
    double gw = 0.0, gb = 0.0;
    for (std::size_t i : batch) {
      const double z = w * x[i] + b;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double resid = static_cast<double>(y[i]) - p;
      gw += resid * x[i];
      gb += resid;
    }
    const double scale = static_cast<double>(x.size()) / static_cast<double>(batch.size());
    return {scale * gw, scale * gb};
  }

  // Posterior mean over a box by dense-grid quadrature.
  std::pair<double, double> quadrature_mean(double lo, double hi, std::size_t steps) const {
    double norm = 0.0, mw = 0.0, mb = 0.0;
    // Subtract the max log posterior for stable exponentiation.
    double peak = -1e300;
    const double dstep = (hi - lo) / static_cast<double>(steps - 1);
    for (std::size_t i = 0; i < steps; ++i) {
      for (std::size_t j = 0; j < steps; ++j) {
        const std::vector<double> t{lo + dstep * static_cast<double>(i),
                                    lo + dstep * static_cast<double>(j)};
        peak = std::max(peak, log_posterior(t));
      }
    }
    for (std::size_t i = 0; i < steps; ++i) {
      for (std::size_t j = 0; j < steps; ++j) {
        const double w = lo + dstep * static_cast<double>(i);
        const double b = lo + dstep * static_cast<double>(j);
        const double mass = std::exp(log_posterior(std::vector<double>{w, b}) - peak);
        norm += mass;
        mw += mass * w;
        mb += mass * b;
      }
    }
    return {mw / norm, mb / norm};
  }
};

}  // namespace testsupport
