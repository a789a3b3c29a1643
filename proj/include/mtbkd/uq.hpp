#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtbkd/dataset.hpp"
#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/sgld.hpp"
#include "mtbkd/threading.hpp"

namespace mtbkd {

// dev(y, q) = -2 log q at the labeled class; twice the cross-entropy loss.
inline double deviance(std::size_t label, std::span<const double> q) {
  return -2.0 * std::log(floored(q[label]));
}

// All chain predictions at one input: an r x K matrix.
inline Matrix chain_predictive(std::span<const std::vector<double>> samples, const NetworkSpec& spec,
                               std::span<const double> x) {
  if (samples.empty()) throw ContractError("chain_predictive: empty chain");
  Matrix out(samples.size(), static_cast<std::size_t>(spec.output_dim()));
  ForwardTrace trace;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    auto q = forward_traced(spec, samples[j], x, trace);
    for (std::size_t k = 0; k < q.size(); ++k) out(j, k) = q[k];
  }
  return out;
}

// Posterior mean deviance: the chain average of the prediction's expected
// deviance under its own outcome distribution, -2 sum_k q_k log q_k.
inline double mean_deviance(const Matrix& predictive) {
  double total = 0.0;
  for (std::size_t j = 0; j < predictive.rows(); ++j) {
    for (std::size_t k = 0; k < predictive.cols(); ++k) {
      const double q = predictive(j, k);
      if (q > 0.0) total -= 2.0 * q * std::log(q);
    }
  }
  return total / static_cast<double>(predictive.rows());
}

inline double mean_deviance(std::span<const std::vector<double>> samples, const NetworkSpec& spec,
                            std::span<const double> x) {
  return mean_deviance(chain_predictive(samples, spec, x));
}

// Empirical credible upper bound for the deviance: the candidate set is the
// finite collection {-2 log q_k^(j)}; returns the smallest candidate whose
// cumulative predictive mass reaches 1 - alpha.
inline double credible_upper(const Matrix& predictive, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("credible_upper: alpha must be in (0,1)");
  const std::size_t r = predictive.rows();
  std::vector<std::pair<double, double>> knots;  // (deviance, mass)
  knots.reserve(r * predictive.cols());
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t k = 0; k < predictive.cols(); ++k) {
      const double q = predictive(j, k);
      knots.emplace_back(-2.0 * std::log(floored(q)), q / static_cast<double>(r));
    }
  }
  std::sort(knots.begin(), knots.end());
  double cum = 0.0;
  const double target = 1.0 - alpha;
  for (const auto& [dev, mass] : knots) {
    cum += mass;
    if (cum >= target - 1e-12) return dev;
  }
  return knots.back().first;  // cumulative mass is 1 up to rounding
}

inline double credible_upper(std::span<const std::vector<double>> samples, const NetworkSpec& spec,
                             std::span<const double> x, double alpha) {
  return credible_upper(chain_predictive(samples, spec, x), alpha);
}

// Chain-averaged indicator mass of the true label's deviance falling inside
// [0, tau]; the per-point quantity whose mean over points is the coverage
// rate.
inline double coverage_mass(const Matrix& predictive, std::size_t label, double tau) {
  std::size_t hits = 0;
  for (std::size_t j = 0; j < predictive.rows(); ++j) {
    if (-2.0 * std::log(floored(predictive(j, label))) <= tau + 1e-12) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictive.rows());
}

struct UqPoint {
  std::size_t index = 0;
  double mean_dev = 0.0;
  std::vector<double> ci_upper;       // one per nominal level
  double realized_dev = 0.0;          // deviance of the true label at the chain-mean prediction
  std::vector<double> covered_mass;   // chain-averaged indicator per level
  std::vector<char> covered;          // realized_dev <= ci_upper
  int predicted_class = 0;
  std::vector<double> mean_prediction;
};

struct UncertaintyReport {
  std::vector<double> levels;  // nominal 1 - alpha values
  std::vector<UqPoint> points;
};

inline UncertaintyReport build_uq_report(std::span<const std::vector<double>> samples,
                                         const NetworkSpec& spec, const LabeledDataset& test,
                                         std::span<const double> levels, unsigned threads = 1) {
  if (samples.empty()) throw ContractError("build_uq_report: empty chain");
  for (double lv : levels) {
    if (!(lv > 0.0 && lv < 1.0)) throw ContractError("build_uq_report: levels must be in (0,1)");
  }
  UncertaintyReport report;
  report.levels.assign(levels.begin(), levels.end());
  report.points.resize(test.n());
  parallel_for(test.n(), threads, [&](std::size_t i) {
    const Matrix predictive = chain_predictive(samples, spec, test.features.row(i));
    UqPoint& pt = report.points[i];
    pt.index = i;
    pt.mean_dev = mean_deviance(predictive);
    pt.mean_prediction.assign(predictive.cols(), 0.0);
    for (std::size_t j = 0; j < predictive.rows(); ++j) {
      for (std::size_t k = 0; k < predictive.cols(); ++k) {
        pt.mean_prediction[k] += predictive(j, k);
      }
    }
    for (double& v : pt.mean_prediction) v /= static_cast<double>(predictive.rows());
    pt.predicted_class = static_cast<int>(
        std::max_element(pt.mean_prediction.begin(), pt.mean_prediction.end()) -
        pt.mean_prediction.begin());
    const auto label = static_cast<std::size_t>(test.labels[i]);
    pt.realized_dev = deviance(label, pt.mean_prediction);
    for (double lv : levels) {
      const double tau = credible_upper(predictive, 1.0 - lv);
      pt.ci_upper.push_back(tau);
      pt.covered_mass.push_back(coverage_mass(predictive, label, tau));
      pt.covered.push_back(pt.realized_dev <= tau + 1e-12 ? 1 : 0);
    }
  });
  return report;
}

// Fraction of predictive deviance mass at the true labels falling inside the
// constructed intervals, averaged over test points.
inline double coverage_rate(const UncertaintyReport& report, std::size_t level_index) {
  if (report.points.empty()) throw ContractError("coverage_rate: empty report");
  double total = 0.0;
  for (const auto& pt : report.points) total += pt.covered_mass[level_index];
  return total / static_cast<double>(report.points.size());
}

struct MetricsTable {
  double overall_accuracy = 0.0;
  std::map<int, double> domain_accuracy;
  std::optional<double> mse;                        // absent when true_probs missing
  std::map<int, double> domain_mse;
  std::vector<std::pair<double, double>> coverage;  // (nominal level, empirical rate)
};

// Accuracy from the chain-mean prediction (argmax), MSE against true class
// probabilities from the mode prediction; per-domain rows from domain tags.
inline MetricsTable point_metrics(const Matrix& mean_pred, const Matrix& mode_pred,
                                  const LabeledDataset& test) {
  if (mean_pred.rows() != test.n() || mode_pred.rows() != test.n()) {
    throw ContractError("point_metrics: prediction rows do not match test set");
  }
  MetricsTable table;
  std::map<int, std::pair<std::size_t, std::size_t>> domain_counts;  // tag -> (correct, total)
  std::map<int, double> domain_sq_err;
  std::size_t correct = 0;
  double sq_err = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const auto row = mean_pred.row(i);
    const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    const bool ok = pred == test.labels[i];
    correct += ok ? 1 : 0;
    double point_err = 0.0;
    if (test.has_true_probs()) {
      for (std::size_t k = 0; k < mode_pred.cols(); ++k) {
        const double d = mode_pred(i, k) - test.true_probs(i, k);
        point_err += d * d;
      }
      sq_err += point_err;
    }
    if (test.has_domains()) {
      auto& [c, t] = domain_counts[test.domain_tags[i]];
      c += ok ? 1 : 0;
      ++t;
      if (test.has_true_probs()) domain_sq_err[test.domain_tags[i]] += point_err;
    }
  }
  table.overall_accuracy = static_cast<double>(correct) / static_cast<double>(test.n());
  for (const auto& [tag, counts] : domain_counts) {
    table.domain_accuracy[tag] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
    if (test.has_true_probs()) {
      table.domain_mse[tag] = domain_sq_err[tag] / (static_cast<double>(counts.second) *
                                                    static_cast<double>(mode_pred.cols()));
    }
  }
  if (test.has_true_probs()) {
    table.mse = sq_err / (static_cast<double>(test.n()) * static_cast<double>(mode_pred.cols()));
  }
  return table;
}

inline Matrix predict_matrix(const NetworkSpec& spec, std::span<const double> theta,
                             const Matrix& features) {
  Matrix out(features.rows(), static_cast<std::size_t>(spec.output_dim()));
  ForwardTrace trace;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto q = forward_traced(spec, theta, features.row(i), trace);
    for (std::size_t k = 0; k < q.size(); ++k) out(i, k) = q[k];
  }
  return out;
}

inline Matrix chain_mean_predictions(std::span<const std::vector<double>> samples,
                                     const NetworkSpec& spec, const Matrix& features,
                                     unsigned threads = 1) {
  Matrix out(features.rows(), static_cast<std::size_t>(spec.output_dim()));
  parallel_for(features.rows(), threads, [&](std::size_t i) {
    ForwardTrace trace;
    std::vector<double> acc(static_cast<std::size_t>(spec.output_dim()), 0.0);
    for (const auto& theta : samples) {
      auto q = forward_traced(spec, theta, features.row(i), trace);
      for (std::size_t k = 0; k < q.size(); ++k) acc[k] += q[k];
    }
    for (std::size_t k = 0; k < acc.size(); ++k) {
      out(i, k) = acc[k] / static_cast<double>(samples.size());
    }
  });
  return out;
}

inline std::string level_suffix(double level) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(std::lround(level * 100)));
  return buf;
}

// Per-point CSV consumed by external plotting.
inline void write_uncertainty_csv(const UncertaintyReport& report, const LabeledDataset& test,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "index";
  for (std::size_t j = 0; j < test.dim(); ++j) out << ",x_" << (j + 1);
  out << ",true_label,predicted_class,mean_deviance";
  for (double lv : report.levels) out << ",ci_upper_" << level_suffix(lv);
  for (double lv : report.levels) out << ",covered_" << level_suffix(lv);
  out << "\n";
  for (const auto& pt : report.points) {
    out << pt.index;
    for (std::size_t j = 0; j < test.dim(); ++j) out << "," << format_double(test.features(pt.index, j));
    out << "," << test.labels[pt.index] << "," << pt.predicted_class << ","
        << format_double(pt.mean_dev);
    for (double ci : pt.ci_upper) out << "," << format_double(ci);
    for (char c : pt.covered) out << "," << static_cast<int>(c);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mtbkd
