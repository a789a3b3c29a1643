#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtbkd/errors.hpp"
#include "mtbkd/linalg.hpp"
#include "mtbkd/rng.hpp"

namespace mtbkd {

// Floor applied inside every log of a predicted probability. Gradients treat
// the floor as a hard clamp: zero derivative through floored coordinates.
inline constexpr double kProbFloor = 1e-12;

inline double floored(double p) { return p < kProbFloor ? kProbFloor : p; }

// Dense feed-forward classifier: ReLU hidden layers, soft-max output.
struct NetworkSpec {
  std::vector<int> layer_sizes;  // input dim, hidden widths..., output dim K

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  void validate() const {
    if (layer_sizes.size() < 2) throw ContractError("NetworkSpec: need at least input and output layers");
    for (int s : layer_sizes) {
      if (s < 1) throw ContractError("NetworkSpec: all layer sizes must be >= 1");
    }
  }

  bool operator==(const NetworkSpec&) const = default;
};

inline std::size_t param_count(const NetworkSpec& spec) {
  spec.validate();
  std::size_t total = 0;
  for (std::size_t l = 1; l < spec.layer_sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(spec.layer_sizes[l - 1]);
    const auto out = static_cast<std::size_t>(spec.layer_sizes[l]);
    total += in * out + out;
  }
  return total;
}

// Flat parameter layout: per layer, the (out x in) weight matrix row-major,
// then the out biases.
struct LayerView {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t in;
  std::size_t out;
};

inline std::vector<LayerView> layer_views(const NetworkSpec& spec) {
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 1; l < spec.layer_sizes.size(); ++l) {
    LayerView v;
    v.in = static_cast<std::size_t>(spec.layer_sizes[l - 1]);
    v.out = static_cast<std::size_t>(spec.layer_sizes[l]);
    v.weight_offset = offset;
    v.bias_offset = offset + v.in * v.out;
    offset = v.bias_offset + v.out;
    views.push_back(v);
  }
  return views;
}

// Per-layer uniform init on [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
inline std::vector<double> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  std::vector<double> theta(param_count(spec));
  Rng rng(seed);
  for (const LayerView& v : layer_views(spec)) {
    const double s = std::sqrt(6.0 / static_cast<double>(v.in + v.out));
    for (std::size_t i = v.weight_offset; i < v.bias_offset + v.out; ++i) {
      theta[i] = rng.uniform(-s, s);
    }
  }
  return theta;
}

inline void check_theta(const NetworkSpec& spec, std::span<const double> theta) {
  if (theta.size() != param_count(spec)) {
    throw ContractError("theta length " + std::to_string(theta.size()) +
                        " does not match param_count " + std::to_string(param_count(spec)));
  }
}

// Activation and pre-activation buffers for one forward pass; reusable across
// samples to avoid reallocation in training loops.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // activations[0] = input, back() = probs
  std::vector<std::vector<double>> preacts;      // preacts[l] = z of layer l+1
};

namespace detail {

inline void affine(std::span<const double> theta, const LayerView& v,
                   std::span<const double> in, std::vector<double>& z) {
  z.assign(v.out, 0.0);
  for (std::size_t o = 0; o < v.out; ++o) {
    const double* w = theta.data() + v.weight_offset + o * v.in;
    double s = theta[v.bias_offset + o];
    for (std::size_t i = 0; i < v.in; ++i) s += w[i] * in[i];
    z[o] = s;
  }
}

inline void softmax(std::span<const double> z, std::vector<double>& q) {
  q.assign(z.size(), 0.0);
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    q[k] = std::exp(z[k] - m);
    s += q[k];
  }
  for (double& v : q) v /= s;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace detail

// h(x; theta): ReLU hidden layers, soft-max on the final layer. The trace
// keeps everything needed for back-propagation.
inline std::span<const double> forward_traced(const NetworkSpec& spec, std::span<const double> theta,
                                              std::span<const double> x, ForwardTrace& trace) {
  const auto views = layer_views(spec);
  if (x.size() != static_cast<std::size_t>(spec.input_dim())) {
    throw ContractError("forward: input size " + std::to_string(x.size()) +
                        " does not match spec input dim " + std::to_string(spec.input_dim()));
  }
  check_theta(spec, theta);

  trace.activations.resize(views.size() + 1);
  trace.preacts.resize(views.size());
  trace.activations[0].assign(x.begin(), x.end());

  for (std::size_t l = 0; l < views.size(); ++l) {
    detail::affine(theta, views[l], trace.activations[l], trace.preacts[l]);
    if (!detail::all_finite(trace.preacts[l])) {
      throw NumericError("forward: non-finite pre-activation at layer " + std::to_string(l + 1));
    }
    if (l + 1 == views.size()) {
      detail::softmax(trace.preacts[l], trace.activations[l + 1]);
    } else {
      auto& a = trace.activations[l + 1];
      a.assign(trace.preacts[l].begin(), trace.preacts[l].end());
      for (double& v : a) v = v > 0.0 ? v : 0.0;
    }
  }
  return trace.activations.back();
}

inline std::vector<double> forward(const NetworkSpec& spec, std::span<const double> theta,
                                   std::span<const double> x) {
  ForwardTrace trace;
  forward_traced(spec, theta, x, trace);
  return trace.activations.back();
}

// Back-propagates d(loss)/d(q) through the soft-max and the dense layers,
// accumulating scale * d(loss)/d(theta) into grad.
inline void accumulate_param_grad(const NetworkSpec& spec, std::span<const double> theta,
                                  const ForwardTrace& trace, std::span<const double> dldq,
                                  double scale, std::span<double> grad) {
  const auto views = layer_views(spec);
  const auto& q = trace.activations.back();

  // Soft-max Jacobian: dL/dz_j = q_j * (dL/dq_j - sum_k dL/dq_k q_k).
  std::vector<double> delta(q.size());
  const double inner = dot(dldq, std::span<const double>(q));
  for (std::size_t j = 0; j < q.size(); ++j) delta[j] = q[j] * (dldq[j] - inner);

  for (std::size_t l = views.size(); l-- > 0;) {
    const LayerView& v = views[l];
    const auto& a_in = trace.activations[l];
    for (std::size_t o = 0; o < v.out; ++o) {
      const double d = delta[o] * scale;
      double* gw = grad.data() + v.weight_offset + o * v.in;
      for (std::size_t i = 0; i < v.in; ++i) gw[i] += d * a_in[i];
      grad[v.bias_offset + o] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(v.in, 0.0);
    for (std::size_t o = 0; o < v.out; ++o) {
      const double* w = theta.data() + v.weight_offset + o * v.in;
      for (std::size_t i = 0; i < v.in; ++i) prev[i] += w[i] * delta[o];
    }
    // ReLU gate of the producing layer.
    const auto& z = trace.preacts[l - 1];
    for (std::size_t i = 0; i < v.in; ++i) prev[i] = z[i] > 0.0 ? prev[i] : 0.0;
    if (!detail::all_finite(prev)) {
      throw NumericError("backward: non-finite gradient at layer " + std::to_string(l));
    }
    delta = std::move(prev);
  }
}

// Cross entropy -sum_k t_k log q_k against an arbitrary target distribution.
inline double cross_entropy(std::span<const double> target, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] != 0.0) s -= target[k] * std::log(floored(q[k]));
  }
  return s;
}

// CE against a one-hot label given as a class index.
inline double ce_loss(std::size_t label, std::span<const double> q) {
  return -std::log(floored(q[label]));
}

// d(CE)/dq for an arbitrary target; floored coordinates get zero gradient.
inline void cross_entropy_dq(std::span<const double> target, std::span<const double> q,
                             std::span<double> dldq) {
  for (std::size_t k = 0; k < q.size(); ++k) {
    dldq[k] = (target[k] != 0.0 && q[k] > kProbFloor) ? -target[k] / q[k] : 0.0;
  }
}

// Exact gradient of the mean per-sample loss over the rows of `features`
// listed in `rows`. The loss functor receives the row id and the soft-max
// output and must fill d(loss)/d(q).
//   double loss(std::size_t row, std::span<const double> q, std::span<double> dldq)
template <typename LossFn>
std::vector<double> grad_scalar_loss(const NetworkSpec& spec, std::span<const double> theta,
                                     const Matrix& features, std::span<const std::size_t> rows,
                                     LossFn&& loss) {
  if (rows.empty()) throw ContractError("grad_scalar_loss: empty batch");
  check_theta(spec, theta);
  std::vector<double> grad(theta.size(), 0.0);
  std::vector<double> dldq(static_cast<std::size_t>(spec.output_dim()));
  ForwardTrace trace;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (std::size_t row : rows) {
    auto q = forward_traced(spec, theta, features.row(row), trace);
    loss(row, q, std::span<double>(dldq));
    accumulate_param_grad(spec, theta, trace, dldq, scale, grad);
  }
  return grad;
}

// Mean loss companion of grad_scalar_loss (same functor shape, derivative
// output ignored).
template <typename LossFn>
double mean_scalar_loss(const NetworkSpec& spec, std::span<const double> theta,
                        const Matrix& features, std::span<const std::size_t> rows, LossFn&& loss) {
  if (rows.empty()) throw ContractError("mean_scalar_loss: empty batch");
  std::vector<double> dldq(static_cast<std::size_t>(spec.output_dim()));
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t row : rows) {
    auto q = forward_traced(spec, theta, features.row(row), trace);
    total += loss(row, q, std::span<double>(dldq));
  }
  return total / static_cast<double>(rows.size());
}

inline bool is_prob_vector(std::span<const double> q, double tol = 1e-9) {
  double s = 0.0;
  for (double v : q) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    s += v;
  }
  return std::abs(s - 1.0) <= tol;
}

}  // namespace mtbkd
