#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/teacher.hpp"

namespace mtbkd {

// log B(alpha) = sum_k lgamma(alpha_k) - lgamma(sum_k alpha_k).
inline double log_multivariate_beta(std::span<const double> alpha) {
  double sum = 0.0, lg = 0.0;
  for (double a : alpha) {
    lg += std::lgamma(a);
    sum += a;
  }
  return lg - std::lgamma(sum);
}

// log B(1_K + lambda p); the concentration sums to K + lambda.
inline double log_beta_one_plus(std::span<const double> p, double lambda) {
  double lg = 0.0;
  for (double v : p) lg += std::lgamma(1.0 + lambda * v);
  return lg - std::lgamma(static_cast<double>(p.size()) + lambda);
}

// Log density of Dir(1_K + lambda p) at q. For lambda > 0 the mode sits at p;
// lambda = 0 gives the uniform distribution on the simplex.
inline double log_dirichlet_density(std::span<const double> q, std::span<const double> p,
                                    double lambda) {
  if (lambda < 0.0) throw ContractError("log_dirichlet_density: lambda must be >= 0");
  if (q.size() != p.size()) throw ContractError("log_dirichlet_density: dimension mismatch");
  double s = 0.0;
  if (lambda > 0.0) {
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (p[k] != 0.0) s += lambda * p[k] * std::log(floored(q[k]));
    }
  }
  return s - log_beta_one_plus(p, lambda);
}

// Teacher-trust strength and the theta-independent normalizers, precomputed
// once per (sample, teacher).
struct PriorConfig {
  double lambda = 1.0;
  WeightingMode weighting_mode = WeightingMode::entropy;
  Matrix log_beta_cache;  // N x G entries log B(1_K + lambda p_i^(g))

  void validate(const TeacherPredictionSet& teachers) const {
    if (lambda < 0.0) throw ContractError("PriorConfig: lambda must be >= 0");
    if (log_beta_cache.rows() != teachers.sample_count() ||
        log_beta_cache.cols() != teachers.teacher_count()) {
      throw ContractError("PriorConfig: cache dimensions do not match predictions");
    }
  }
};

inline PriorConfig build_prior_config(const TeacherPredictionSet& teachers, double lambda) {
  if (lambda < 0.0) throw ContractError("build_prior_config: lambda must be >= 0");
  PriorConfig cfg;
  cfg.lambda = lambda;
  cfg.weighting_mode = teachers.mode;
  cfg.log_beta_cache = Matrix(teachers.sample_count(), teachers.teacher_count());
  for (std::size_t i = 0; i < teachers.sample_count(); ++i) {
    for (std::size_t g = 0; g < teachers.teacher_count(); ++g) {
      cfg.log_beta_cache(i, g) = log_beta_one_plus(teachers.probs[g].row(i), lambda);
    }
  }
  return cfg;
}

// One sample's mixture prior term log sum_g w_g f(q | p^(g)) evaluated in log
// space. `log_terms` and `resp` are scratch buffers sized G by the caller.
struct MixtureScratch {
  std::vector<double> log_terms;
  std::vector<double> resp;
};

// Fills scratch.log_terms with a_g = log w_g + log f(q | p^(g)) and
// scratch.resp with the soft-max responsibilities; returns logsumexp(a).
inline double mixture_log_term_and_resp(std::span<const double> q,
                                        const TeacherPredictionSet& teachers,
                                        const PriorConfig& prior, std::size_t sample,
                                        MixtureScratch& scratch) {
  const std::size_t g_count = teachers.teacher_count();
  scratch.log_terms.resize(g_count);
  scratch.resp.resize(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    const auto p = teachers.probs[g].row(sample);
    double s = 0.0;
    if (prior.lambda > 0.0) {
      for (std::size_t k = 0; k < q.size(); ++k) {
        if (p[k] != 0.0) s += prior.lambda * p[k] * std::log(floored(q[k]));
      }
    }
    scratch.log_terms[g] =
        std::log(teachers.weights(sample, g)) + s - prior.log_beta_cache(sample, g);
  }
  const double lse = log_sum_exp(scratch.log_terms);
  for (std::size_t g = 0; g < g_count; ++g) scratch.resp[g] = std::exp(scratch.log_terms[g] - lse);
  return lse;
}

// Free-standing single-sample form: log sum_g w_g f(q | p_g) with explicit
// teacher rows and weights.
inline double log_mixture_prior_term(std::span<const double> q,
                                     std::span<const std::span<const double>> teacher_rows,
                                     std::span<const double> weights, double lambda) {
  if (teacher_rows.empty()) throw ContractError("log_mixture_prior_term: no teachers");
  if (teacher_rows.size() != weights.size()) {
    throw ContractError("log_mixture_prior_term: weights do not match teachers");
  }
  std::vector<double> terms(teacher_rows.size());
  for (std::size_t g = 0; g < teacher_rows.size(); ++g) {
    terms[g] = std::log(weights[g]) + log_dirichlet_density(q, teacher_rows[g], lambda);
  }
  return log_sum_exp(terms);
}

// Same term plus its gradient in q (responsibility-weighted); floored
// coordinates contribute zero gradient.
inline double log_mixture_prior_term_with_dq(std::span<const double> q,
                                             std::span<const std::span<const double>> teacher_rows,
                                             std::span<const double> weights, double lambda,
                                             std::span<double> dq) {
  std::vector<double> terms(teacher_rows.size());
  for (std::size_t g = 0; g < teacher_rows.size(); ++g) {
    terms[g] = std::log(weights[g]) + log_dirichlet_density(q, teacher_rows[g], lambda);
  }
  const double lse = log_sum_exp(terms);
  for (std::size_t k = 0; k < q.size(); ++k) dq[k] = 0.0;
  for (std::size_t g = 0; g < teacher_rows.size(); ++g) {
    const double r = std::exp(terms[g] - lse);
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (q[k] > kProbFloor) dq[k] += r * lambda * teacher_rows[g][k] / q[k];
    }
  }
  return lse;
}

}  // namespace mtbkd
