#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtbkd/errors.hpp"
#include "mtbkd/rng.hpp"

namespace mtbkd {

// Anything SGLD can sample from: a log target over a flat parameter vector
// whose gradient estimator is already rescaled to full-data magnitude.
template <typename T>
concept SgldTarget = requires(const T& t, std::span<const double> theta,
                              std::span<const std::size_t> batch) {
  { t.param_dim() } -> std::convertible_to<std::size_t>;
  { t.data_size() } -> std::convertible_to<std::size_t>;
  { t.grad_log_posterior(theta, batch) } -> std::convertible_to<std::vector<double>>;
};

struct StepSchedule {
  enum class Kind { constant, polynomial };
  Kind kind = Kind::polynomial;
  double tau = 1e-5;    // constant step
  double a = 1e-4;      // polynomial: tau_j = a * (b + j)^(-gamma)
  double b = 100.0;
  double gamma = 0.55;

  double step(std::size_t iter) const {
    if (kind == Kind::constant) return tau;
    return a * std::pow(b + static_cast<double>(iter), -gamma);
  }

  void validate() const {
    if (kind == Kind::constant) {
      if (tau <= 0.0) throw ConfigError("StepSchedule: tau must be positive");
    } else {
      if (a <= 0.0 || b <= 0.0 || gamma <= 0.0) {
        throw ConfigError("StepSchedule: polynomial parameters must be positive");
      }
    }
  }
};

struct SgldConfig {
  StepSchedule schedule;
  std::size_t total_iters = 20000;
  std::size_t batch_size = 64;
  std::size_t burn_in = 10000;
  std::size_t thinning = 10;
  std::uint64_t seed = 0;
  std::optional<double> param_clip;  // symmetric box [-c, c] per coordinate

  void validate() const {
    schedule.validate();
    if (total_iters == 0) throw ConfigError("SgldConfig: total_iters must be positive");
    if (burn_in >= total_iters) throw ConfigError("SgldConfig: burn_in must be < total_iters");
    if (thinning < 1) throw ConfigError("SgldConfig: thinning must be >= 1");
    if (batch_size < 1) throw ConfigError("SgldConfig: batch_size must be >= 1");
    if (param_clip && *param_clip <= 0.0) throw ConfigError("SgldConfig: param_clip must be positive");
  }

  std::size_t expected_samples() const { return (total_iters - burn_in) / thinning; }
};

// Ordered post-burn-in, thinned samples plus run metadata.
struct PosteriorChain {
  std::vector<std::vector<double>> samples;
  SgldConfig config;
  std::size_t param_dim = 0;
  std::size_t iterations_run = 0;
  double final_step = 0.0;
  bool diverged = false;
  std::size_t divergence_iter = 0;
};

namespace detail {

// Epoch-reshuffled deck of row indices; deals `m` at a time.
class BatchDealer {
 public:
  BatchDealer(std::size_t n, std::size_t m, Rng& rng) : m_(std::min(m, n)), rng_(rng), deck_(n) {
    std::iota(deck_.begin(), deck_.end(), std::size_t{0});
    rng_.shuffle(deck_);
  }

  std::span<const std::size_t> next() {
    if (pos_ + m_ > deck_.size()) {
      rng_.shuffle(deck_);
      pos_ = 0;
    }
    auto batch = std::span<const std::size_t>(deck_.data() + pos_, m_);
    pos_ += m_;
    return batch;
  }

 private:
  std::size_t m_;
  Rng& rng_;
  std::vector<std::size_t> deck_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// theta_j = theta_{j-1} + tau * grad log pi(theta | batch) + sqrt(2 tau) xi.
// On divergence the chain collected so far is returned with a flag rather
// than thrown away.
template <SgldTarget Target>
PosteriorChain sgld_run(const Target& target, const SgldConfig& config,
                        std::span<const double> init) {
  config.validate();
  const std::size_t dim = target.param_dim();
  if (init.size() != dim) throw ContractError("sgld_run: init length does not match target dim");

  PosteriorChain chain;
  chain.config = config;
  chain.param_dim = dim;
  chain.samples.reserve(config.expected_samples());

  Rng noise_rng(config.seed, /*stream=*/5);
  Rng batch_rng(config.seed, /*stream=*/6);
  detail::BatchDealer dealer(target.data_size(), config.batch_size, batch_rng);

  std::vector<double> theta(init.begin(), init.end());
  double tau = 0.0;
  for (std::size_t j = 1; j <= config.total_iters; ++j) {
    tau = config.schedule.step(j);
    const auto batch = dealer.next();
    std::vector<double> grad;
    bool bad_step = false;
    try {
      grad = target.grad_log_posterior(theta, batch);
    } catch (const NumericError&) {
      bad_step = true;
    }
    if (!bad_step) {
      const double noise_scale = std::sqrt(2.0 * tau);
      for (std::size_t d = 0; d < dim; ++d) {
        theta[d] += tau * grad[d] + noise_scale * noise_rng.normal();
        if (config.param_clip) {
          theta[d] = std::clamp(theta[d], -*config.param_clip, *config.param_clip);
        }
        if (!std::isfinite(theta[d])) bad_step = true;
      }
    }
    if (bad_step) {
      chain.diverged = true;
      chain.divergence_iter = j;
      chain.iterations_run = j;
      chain.final_step = tau;
      return chain;
    }
    if (j > config.burn_in && (j - config.burn_in) % config.thinning == 0) {
      chain.samples.push_back(theta);
    }
  }
  chain.iterations_run = config.total_iters;
  chain.final_step = tau;
  return chain;
}

struct ChainSummary {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> ess;
};

// Per-coordinate mean, variance, and effective sample size. ESS uses Geyer's
// initial positive sequence: sum autocovariances while consecutive even/odd
// pairs stay positive, then ess = r * gamma_0 / (gamma_0 + 2 * sum).
inline ChainSummary chain_summary(const PosteriorChain& chain) {
  const std::size_t r = chain.samples.size();
  if (r < 2) throw ContractError("chain_summary: need at least two samples");
  const std::size_t dim = chain.param_dim;
  ChainSummary s;
  s.mean.assign(dim, 0.0);
  s.variance.assign(dim, 0.0);
  s.ess.assign(dim, 0.0);

  std::vector<double> coord(r);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t j = 0; j < r; ++j) mean += chain.samples[j][d];
    mean /= static_cast<double>(r);
    for (std::size_t j = 0; j < r; ++j) coord[j] = chain.samples[j][d] - mean;

    double gamma0 = 0.0;
    for (double v : coord) gamma0 += v * v;
    gamma0 /= static_cast<double>(r);

    s.mean[d] = mean;
    s.variance[d] = gamma0 * static_cast<double>(r) / static_cast<double>(r - 1);
    if (gamma0 == 0.0) {
      s.ess[d] = static_cast<double>(r);
      continue;
    }

    auto autocov = [&](std::size_t lag) {
      double acc = 0.0;
      for (std::size_t j = 0; j + lag < r; ++j) acc += coord[j] * coord[j + lag];
      return acc / static_cast<double>(r);
    };

    double acf_sum = 0.0;
    for (std::size_t lag = 1; lag + 1 < r; lag += 2) {
      const double pair = autocov(lag) + autocov(lag + 1);
      if (pair <= 0.0) break;
      acf_sum += pair;
    }
    const double ess = static_cast<double>(r) * gamma0 / (gamma0 + 2.0 * acf_sum);
    s.ess[d] = std::min(ess, static_cast<double>(r));
  }
  return s;
}

// Binary chain file: header (target hash, config, r), body of raw doubles.
inline void write_chain(const PosteriorChain& chain, std::uint64_t target_hash,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const char magic[8] = {'M', 'T', 'B', 'K', 'D', 'C', 'H', 'N'};
  out.write(magic, 8);
  auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto write_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  write_u64(1);
  write_u64(target_hash);
  write_u64(chain.config.schedule.kind == StepSchedule::Kind::constant ? 0 : 1);
  write_f64(chain.config.schedule.tau);
  write_f64(chain.config.schedule.a);
  write_f64(chain.config.schedule.b);
  write_f64(chain.config.schedule.gamma);
  write_u64(chain.config.total_iters);
  write_u64(chain.config.batch_size);
  write_u64(chain.config.burn_in);
  write_u64(chain.config.thinning);
  write_u64(chain.config.seed);
  write_u64(chain.config.param_clip ? 1 : 0);
  write_f64(chain.config.param_clip.value_or(0.0));
  write_u64(chain.param_dim);
  write_u64(chain.samples.size());
  write_u64(chain.iterations_run);
  write_f64(chain.final_step);
  write_u64(chain.diverged ? 1 : 0);
  write_u64(chain.divergence_iter);
  for (const auto& sample : chain.samples) {
    out.write(reinterpret_cast<const char*>(sample.data()),
              static_cast<std::streamsize>(sample.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline PosteriorChain read_chain(const std::string& path, std::uint64_t* target_hash = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "MTBKDCHN", 8) != 0) throw IoError("bad chain file magic: " + path);
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto read_f64 = [&]() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (read_u64() != 1) throw IoError("unsupported chain file version: " + path);
  const std::uint64_t hash = read_u64();
  if (target_hash) *target_hash = hash;
  PosteriorChain chain;
  chain.config.schedule.kind =
      read_u64() == 0 ? StepSchedule::Kind::constant : StepSchedule::Kind::polynomial;
  chain.config.schedule.tau = read_f64();
  chain.config.schedule.a = read_f64();
  chain.config.schedule.b = read_f64();
  chain.config.schedule.gamma = read_f64();
  chain.config.total_iters = read_u64();
  chain.config.batch_size = read_u64();
  chain.config.burn_in = read_u64();
  chain.config.thinning = read_u64();
  chain.config.seed = read_u64();
  const bool has_clip = read_u64() != 0;
  const double clip = read_f64();
  if (has_clip) chain.config.param_clip = clip;
  chain.param_dim = read_u64();
  const std::size_t r = read_u64();
  chain.iterations_run = read_u64();
  chain.final_step = read_f64();
  chain.diverged = read_u64() != 0;
  chain.divergence_iter = read_u64();
  chain.samples.assign(r, std::vector<double>(chain.param_dim));
  for (auto& sample : chain.samples) {
    in.read(reinterpret_cast<char*>(sample.data()),
            static_cast<std::streamsize>(sample.size() * sizeof(double)));
  }
  if (!in) throw IoError("truncated chain file: " + path);
  return chain;
}

}  // namespace mtbkd
