#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mtbkd/dataset.hpp"
#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/rng.hpp"

namespace mtbkd {

// Domain assignment rule for synthetic benchmarks. Binary scenario uses two
// vertical bands on x1; the multi-class scenario tags by generating component.
struct DomainPartition {
  enum class Rule { sim1_thresholds, sim2_component };
  Rule rule = Rule::sim1_thresholds;
  double t1 = -0.85;
  double t2 = 1.4;

  void validate() const {
    if (rule == Rule::sim1_thresholds && !(t1 < t2)) {
      throw ConfigError("DomainPartition: need t1 < t2");
    }
  }

  int sim1_tag(double x1) const {
    if (x1 < t1) return 1;
    if (x1 < t2) return 2;
    return 3;
  }
};

inline double sim1_eta(double x1, double x2) {
  return -0.5 + 0.1 * x1 + 0.8 * x1 * x1 - 0.8 * x2 * x2;
}

// P(Y = 1 | x) for the binary benchmark.
inline double sim1_true_prob(double x1, double x2) {
  const double eta = sim1_eta(x1, x2);
  // exp(eta) / (1 + exp(eta)) written to avoid overflow for large |eta|.
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Binary benchmark: x1 ~ U(-3, 3.5), x2 ~ U(-3, 3), Y ~ Bernoulli(p(x)).
// Class 0 is the Y=1 outcome so true_probs rows are (p, 1-p).
inline LabeledDataset gen_sim1(std::size_t n, std::uint64_t seed, const DomainPartition& partition) {
  if (n < 1) throw ContractError("gen_sim1: n must be >= 1");
  partition.validate();
  LabeledDataset ds;
  ds.num_classes = 2;
  ds.features = Matrix(n, 2);
  ds.true_probs = Matrix(n, 2);
  ds.labels.resize(n);
  ds.domain_tags.resize(n);
  Rng rng(seed, /*stream=*/1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = rng.uniform(-3.0, 3.5);
    const double x2 = rng.uniform(-3.0, 3.0);
    const double p = sim1_true_prob(x1, x2);
    ds.features(i, 0) = x1;
    ds.features(i, 1) = x2;
    ds.true_probs(i, 0) = p;
    ds.true_probs(i, 1) = 1.0 - p;
    ds.labels[i] = rng.uniform() < p ? 0 : 1;
    ds.domain_tags[i] = partition.sim1_tag(x1);
  }
  return ds;
}

inline std::array<std::array<double, 5>, 5> sim2_means() {
  return {{{0, 0, 0, 0, 0}, {3, 3, 3, 3, 3}, {0, 0, 1, 3, 2}, {2, 0, 1, 2, 1}, {2, 2, 1, 0, 1}}};
}

// Covariance (0.5^{|i-j|}) of the five-dimensional Gaussian components.
inline Matrix sim2_covariance() {
  Matrix sigma(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      sigma(i, j) = std::pow(0.5, std::abs(static_cast<int>(i) - static_cast<int>(j)));
    }
  }
  return sigma;
}

// Normalized Gaussian density ratios p_k(x); the shared covariance makes the
// normalizing constants cancel, leaving soft-max of -0.5 * Mahalanobis^2.
inline std::vector<double> sim2_true_probs(std::span<const double> x, const Matrix& chol) {
  const auto means = sim2_means();
  std::vector<double> logd(5);
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<double> diff(5);
    for (std::size_t j = 0; j < 5; ++j) diff[j] = x[j] - means[c][j];
    const auto y = forward_solve(chol, diff);
    logd[c] = -0.5 * dot(y, y);
  }
  const double lse = log_sum_exp(logd);
  std::vector<double> probs(5);
  for (std::size_t c = 0; c < 5; ++c) probs[c] = std::exp(logd[c] - lse);
  return probs;
}

// Five-class benchmark: n_per_class draws from each N(mu_i, Sigma); labels
// drawn from the density-ratio probabilities, domain tag = generating
// component (1-based).
inline LabeledDataset gen_sim2(std::size_t n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw ContractError("gen_sim2: n_per_class must be >= 1");
  const auto means = sim2_means();
  const Matrix chol = cholesky(sim2_covariance());
  const std::size_t n = n_per_class * 5;

  LabeledDataset ds;
  ds.num_classes = 5;
  ds.features = Matrix(n, 5);
  ds.true_probs = Matrix(n, 5);
  ds.labels.resize(n);
  ds.domain_tags.resize(n);

  Rng rng(seed, /*stream=*/2);
  std::vector<double> z(5), x(5);
  std::size_t row = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t s = 0; s < n_per_class; ++s, ++row) {
      for (double& v : z) v = rng.normal();
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = means[c][j];
        for (std::size_t k = 0; k <= j; ++k) acc += chol(j, k) * z[k];
        x[j] = acc;
      }
      const auto probs = sim2_true_probs(x, chol);
      for (std::size_t j = 0; j < 5; ++j) {
        ds.features(row, j) = x[j];
        ds.true_probs(row, j) = probs[j];
      }
      // Multinomial draw from the true class probabilities.
      const double u = rng.uniform();
      double cum = 0.0;
      int label = 4;
      for (int k = 0; k < 5; ++k) {
        cum += probs[static_cast<std::size_t>(k)];
        if (u < cum) {
          label = k;
          break;
        }
      }
      ds.labels[row] = label;
      ds.domain_tags[row] = static_cast<int>(c) + 1;
    }
  }
  return ds;
}

// Resample biased toward one domain: an exact quota of round(fraction * size)
// specialty points, remainder uniform over the other domains. Falls back to
// sampling with replacement when a pool is too small, and says so.
struct TeacherCorpus {
  LabeledDataset data;
  bool with_replacement_fallback = false;
};

inline TeacherCorpus gen_teacher_corpus(const LabeledDataset& ds, int specialty_domain,
                                        double specialty_fraction, std::size_t size,
                                        std::uint64_t seed) {
  if (!ds.has_domains()) throw ContractError("gen_teacher_corpus: dataset has no domain tags");
  if (!(specialty_fraction > 0.0 && specialty_fraction <= 1.0)) {
    throw ContractError("gen_teacher_corpus: specialty_fraction must be in (0,1]");
  }
  std::vector<std::size_t> specialty, others;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    (ds.domain_tags[i] == specialty_domain ? specialty : others).push_back(i);
  }
  if (specialty.empty()) throw ContractError("gen_teacher_corpus: specialty domain not present");

  const auto n_spec = static_cast<std::size_t>(std::llround(specialty_fraction * static_cast<double>(size)));
  const std::size_t n_other = size - n_spec;
  if (n_other > 0 && others.empty()) {
    throw ContractError("gen_teacher_corpus: no points outside the specialty domain");
  }

  Rng rng(seed, /*stream=*/3);
  TeacherCorpus out;
  std::vector<std::size_t> chosen;
  chosen.reserve(size);

  auto draw_from = [&](std::vector<std::size_t>& pool, std::size_t count) {
    if (count <= pool.size()) {
      rng.shuffle(pool);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    } else {
      out.with_replacement_fallback = true;
      for (std::size_t i = 0; i < count; ++i) chosen.push_back(pool[rng.uniform_index(pool.size())]);
    }
  };
  draw_from(specialty, n_spec);
  if (n_other > 0) draw_from(others, n_other);
  rng.shuffle(chosen);
  out.data = subset(ds, chosen);
  return out;
}

// One-dimensional conjugate example: a two-component Gaussian prior on a
// location parameter, Gaussian observations, closed-form mixture posterior.
struct ToyProblem {
  std::array<double, 2> prior_means{2.0, 6.0};
  double prior_var = 1.0;
  double obs_mean = 3.5;
  double obs_var = 2.0;
  int n_obs = 1;

  // Closed-form posterior mixture.
  std::array<double, 2> post_means{};
  double post_var = 0.0;
  std::array<double, 2> post_weights{};

  double posterior_density(double theta) const {
    constexpr double two_pi = 6.283185307179586476925286766559;
    double d = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double z = theta - post_means[static_cast<std::size_t>(c)];
      d += post_weights[static_cast<std::size_t>(c)] *
           std::exp(-0.5 * z * z / post_var) / std::sqrt(two_pi * post_var);
    }
    return d;
  }

  double posterior_mean() const {
    return post_weights[0] * post_means[0] + post_weights[1] * post_means[1];
  }

  // Un-normalized log target used by samplers: log prior mixture + log lik.
  double log_posterior(double theta) const {
    std::array<double, 2> comp;
    for (std::size_t c = 0; c < 2; ++c) {
      const double z = theta - prior_means[c];
      comp[c] = std::log(0.5) - 0.5 * z * z / prior_var;
    }
    const double zl = theta - obs_mean;
    // n_obs observations at the sample mean carry the same likelihood shape.
    return log_sum_exp(comp) - 0.5 * static_cast<double>(n_obs) * zl * zl / obs_var;
  }

  double grad_log_posterior(double theta) const {
    std::array<double, 2> comp;
    for (std::size_t c = 0; c < 2; ++c) {
      const double z = theta - prior_means[c];
      comp[c] = std::log(0.5) - 0.5 * z * z / prior_var;
    }
    const double lse = log_sum_exp(comp);
    double g = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      const double resp = std::exp(comp[c] - lse);
      g += resp * (prior_means[c] - theta) / prior_var;
    }
    g += static_cast<double>(n_obs) * (obs_mean - theta) / obs_var;
    return g;
  }
};

inline ToyProblem gen_toy_1d(std::array<double, 2> prior_means = {2.0, 6.0}, double prior_var = 1.0,
                             double obs = 3.5, double obs_var = 2.0, int n_obs = 1) {
  if (prior_var <= 0.0 || obs_var <= 0.0) throw ContractError("gen_toy_1d: variances must be positive");
  if (n_obs < 1) throw ContractError("gen_toy_1d: n_obs must be >= 1");
  ToyProblem toy;
  toy.prior_means = prior_means;
  toy.prior_var = prior_var;
  toy.obs_mean = obs;
  toy.obs_var = obs_var;
  toy.n_obs = n_obs;

  const double n = static_cast<double>(n_obs);
  const double precision = 1.0 / prior_var + n / obs_var;
  toy.post_var = 1.0 / precision;
  std::array<double, 2> log_w{};
  for (std::size_t c = 0; c < 2; ++c) {
    toy.post_means[c] = (prior_means[c] / prior_var + n * obs / obs_var) / precision;
    // Marginal likelihood of the sample mean under prior component c:
    // xbar ~ N(mu_c, prior_var + obs_var / n).
    const double marg_var = prior_var + obs_var / n;
    const double z = obs - prior_means[c];
    log_w[c] = -0.5 * z * z / marg_var;
  }
  const double lse = log_sum_exp(log_w);
  for (std::size_t c = 0; c < 2; ++c) toy.post_weights[c] = std::exp(log_w[c] - lse);
  return toy;
}

// Adapter exposing the toy posterior through the sampler's target interface.
struct Toy1dTarget {
  ToyProblem toy;

  std::size_t param_dim() const { return 1; }
  std::size_t data_size() const { return static_cast<std::size_t>(toy.n_obs); }
  double log_posterior(std::span<const double> theta) const { return toy.log_posterior(theta[0]); }
  std::vector<double> grad_log_posterior(std::span<const double> theta,
                                         std::span<const std::size_t> /*batch*/) const {
    // Observations are interchangeable; the full-data gradient is exact.
    return {toy.grad_log_posterior(theta[0])};
  }
};

}  // namespace mtbkd
