#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mtbkd/errors.hpp"
#include "mtbkd/nn.hpp"
#include "mtbkd/rng.hpp"

namespace mtbkd {

struct TrainHyper {
  double learning_rate = 0.1;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

// Plain mini-batch gradient descent with a fixed learning rate on the mean of
// a per-sample scalar loss. Rows are reshuffled each epoch. Throws
// TrainingError with the epoch index if the parameters go non-finite.
template <typename LossFn>
std::vector<double> minibatch_gd(const NetworkSpec& spec, std::vector<double> theta,
                                 const Matrix& features, const TrainHyper& hyper, LossFn&& loss) {
  if (features.rows() == 0) throw ContractError("minibatch_gd: empty training set");
  check_theta(spec, theta);
  const std::size_t n = features.rows();
  const std::size_t m = std::min(hyper.batch_size, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hyper.seed, /*stream=*/4);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += m) {
      const std::size_t len = std::min(m, n - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      std::vector<double> grad;
      try {
        grad = grad_scalar_loss(spec, theta, features, batch, loss);
      } catch (const NumericError& e) {
        throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
      }
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= hyper.learning_rate * grad[i];
    }
    for (double v : theta) {
      if (!std::isfinite(v)) throw TrainingError("training diverged: non-finite parameters", epoch);
    }
  }
  return theta;
}

}  // namespace mtbkd
