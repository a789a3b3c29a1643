#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtbkd/dataset.hpp"
#include "mtbkd/errors.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/prior.hpp"
#include "mtbkd/teacher.hpp"

namespace mtbkd {

// The multinomial likelihood of the training labels combined with the
// teacher-informed mixture prior; everything downstream (sampling, baselines,
// equivalence checks) works off this object.
struct PosteriorProblem {
  NetworkSpec spec;
  LabeledDataset data;
  TeacherPredictionSet teachers;
  PriorConfig prior;

  std::size_t param_dim() const { return param_count(spec); }
  std::size_t data_size() const { return data.n(); }

  void validate() const {
    spec.validate();
    data.validate();
    teachers.validate();
    prior.validate(teachers);
    if (data.n() != teachers.sample_count()) {
      throw ContractError("PosteriorProblem: data rows do not match teacher prediction rows");
    }
    if (static_cast<std::size_t>(data.num_classes) != teachers.class_count() ||
        data.num_classes != spec.output_dim()) {
      throw ContractError("PosteriorProblem: class count mismatch");
    }
  }

  // Unnormalized log posterior, summed over all N training points.
  double log_posterior(std::span<const double> theta) const {
    const std::size_t n = data.n();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return log_posterior_over(theta, all);
  }

  double log_posterior_over(std::span<const double> theta,
                            std::span<const std::size_t> rows) const {
    ForwardTrace trace;
    MixtureScratch scratch;
    double total = 0.0;
    for (std::size_t i : rows) {
      auto q = forward_traced(spec, theta, data.features.row(i), trace);
      const auto label = static_cast<std::size_t>(data.labels[i]);
      double term = std::log(floored(q[label]));
      term += mixture_log_term_and_resp(q, teachers, prior, i, scratch);
      if (!std::isfinite(term)) {
        throw NumericError("log_posterior: non-finite term at sample " + std::to_string(i));
      }
      total += term;
    }
    return total;
  }

  // Mini-batch gradient estimator: (N/m) times the batch's contribution. The
  // prior is data-indexed (one mixture factor per training point), so both
  // the likelihood and the prior terms rescale with the batch fraction.
  std::vector<double> grad_log_posterior(std::span<const double> theta,
                                         std::span<const std::size_t> batch) const {
    if (batch.empty()) throw ContractError("grad_log_posterior: empty batch");
    check_theta(spec, theta);
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> dldq(static_cast<std::size_t>(spec.output_dim()));
    ForwardTrace trace;
    MixtureScratch scratch;
    const double scale =
        static_cast<double>(data.n()) / static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      auto q = forward_traced(spec, theta, data.features.row(i), trace);
      mixture_log_term_and_resp(q, teachers, prior, i, scratch);
      const auto label = static_cast<std::size_t>(data.labels[i]);
      for (std::size_t k = 0; k < q.size(); ++k) {
        double d = 0.0;
        if (q[k] > kProbFloor) {
          if (k == label) d += 1.0 / q[k];
          double pooled = 0.0;
          for (std::size_t g = 0; g < teachers.teacher_count(); ++g) {
            pooled += scratch.resp[g] * teachers.probs[g](i, k);
          }
          d += prior.lambda * pooled / q[k];
        }
        dldq[k] = d;
      }
      accumulate_param_grad(spec, theta, trace, dldq, scale, grad);
    }
    for (double v : grad) {
      if (!std::isfinite(v)) throw NumericError("grad_log_posterior: non-finite gradient");
    }
    return grad;
  }

  std::vector<double> grad_log_posterior(std::span<const double> theta) const {
    std::vector<std::size_t> all(data.n());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return grad_log_posterior(theta, all);
  }
};

inline PosteriorProblem make_posterior_problem(NetworkSpec spec, LabeledDataset data,
                                               TeacherPredictionSet teachers, double lambda) {
  PosteriorProblem problem;
  problem.spec = std::move(spec);
  problem.data = std::move(data);
  problem.prior = build_prior_config(teachers, lambda);
  problem.teachers = std::move(teachers);
  problem.validate();
  return problem;
}

// Single-teacher distillation objective: mean CE to labels plus lambda times
// mean CE to the teacher's probabilities.
inline double kd_loss(const PosteriorProblem& problem, std::span<const double> theta,
                      double lambda) {
  if (problem.teachers.teacher_count() != 1) throw ContractError("kd_loss: requires exactly one teacher");
  ForwardTrace trace;
  double data_term = 0.0, teacher_term = 0.0;
  for (std::size_t i = 0; i < problem.data.n(); ++i) {
    auto q = forward_traced(problem.spec, theta, problem.data.features.row(i), trace);
    data_term += ce_loss(static_cast<std::size_t>(problem.data.labels[i]), q);
    teacher_term += cross_entropy(problem.teachers.probs[0].row(i), q);
  }
  const double n = static_cast<double>(problem.data.n());
  return data_term / n + lambda * teacher_term / n;
}

// Multi-teacher distillation objective with per-sample weights (the weighted
// baseline): L + lambda * mean_i sum_g w_i^(g) CE(p_i^(g), q_i).
inline double multi_kd_loss(const PosteriorProblem& problem, std::span<const double> theta,
                            double lambda) {
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t i = 0; i < problem.data.n(); ++i) {
    auto q = forward_traced(problem.spec, theta, problem.data.features.row(i), trace);
    double t = ce_loss(static_cast<std::size_t>(problem.data.labels[i]), q);
    for (std::size_t g = 0; g < problem.teachers.teacher_count(); ++g) {
      t += lambda * problem.teachers.weights(i, g) *
           cross_entropy(problem.teachers.probs[g].row(i), q);
    }
    total += t;
  }
  return total / static_cast<double>(problem.data.n());
}

// Variant with one global weight per teacher, summing to 1.
inline double multi_kd_loss_global(const PosteriorProblem& problem, std::span<const double> theta,
                                   double lambda, std::span<const double> global_weights) {
  if (global_weights.size() != problem.teachers.teacher_count()) {
    throw ContractError("multi_kd_loss_global: weight count mismatch");
  }
  double wsum = 0.0;
  for (double w : global_weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9) throw ContractError("multi_kd_loss_global: weights must sum to 1");
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t i = 0; i < problem.data.n(); ++i) {
    auto q = forward_traced(problem.spec, theta, problem.data.features.row(i), trace);
    double t = ce_loss(static_cast<std::size_t>(problem.data.labels[i]), q);
    for (std::size_t g = 0; g < problem.teachers.teacher_count(); ++g) {
      t += lambda * global_weights[g] * cross_entropy(problem.teachers.probs[g].row(i), q);
    }
    total += t;
  }
  return total / static_cast<double>(problem.data.n());
}

// Per-sample loss functor for training the multi-teacher KD baselines with
// minibatch_gd; uses per-sample weights when `per_sample` is true, otherwise
// the provided global weights.
struct MultiKdSampleLoss {
  const PosteriorProblem* problem;
  double lambda;
  bool per_sample = true;
  std::vector<double> global_weights;

  double operator()(std::size_t row, std::span<const double> q, std::span<double> dldq) const {
    const auto& teachers = problem->teachers;
    const auto label = static_cast<std::size_t>(problem->data.labels[row]);
    double value = ce_loss(label, q);
    for (std::size_t k = 0; k < q.size(); ++k) dldq[k] = 0.0;
    if (q[label] > kProbFloor) dldq[label] = -1.0 / q[label];
    for (std::size_t g = 0; g < teachers.teacher_count(); ++g) {
      const double w = per_sample ? teachers.weights(row, g) : global_weights[g];
      const auto p = teachers.probs[g].row(row);
      value += lambda * w * cross_entropy(p, q);
      for (std::size_t k = 0; k < q.size(); ++k) {
        if (p[k] != 0.0 && q[k] > kProbFloor) dldq[k] -= lambda * w * p[k] / q[k];
      }
    }
    return value;
  }
};

// Gradient of multi_kd_loss over the full data, for the equivalence checks
// and baseline training diagnostics.
inline std::vector<double> grad_multi_kd_loss(const PosteriorProblem& problem,
                                              std::span<const double> theta, double lambda,
                                              bool per_sample = true,
                                              std::span<const double> global_weights = {}) {
  MultiKdSampleLoss loss;
  loss.problem = &problem;
  loss.lambda = lambda;
  loss.per_sample = per_sample;
  if (!per_sample) loss.global_weights.assign(global_weights.begin(), global_weights.end());
  std::vector<std::size_t> all(problem.data.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return grad_scalar_loss(problem.spec, theta, problem.data.features, all, loss);
}

}  // namespace mtbkd
