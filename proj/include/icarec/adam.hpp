#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "icarec/error.hpp"
#include "icarec/nn.hpp"
#include "icarec/tensor.hpp"

namespace icarec::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Coupled L2 penalty: weight_decay * theta is added to the gradient.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline AdamState make_adam(const Net& net, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const auto& p : net.params) {
    s.m.push_back(Tensor::zeros(p.value.shape()));
    s.v.push_back(Tensor::zeros(p.value.shape()));
  }
  return s;
}

/// One bias-corrected Adam update of every parameter of `net`.
inline void adam_step(AdamState& state, Net& net, const std::vector<Tensor>& grads) {
  if (grads.size() != net.params.size() || state.m.size() != net.params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != net.params[i].value.shape()) {
      throw ShapeError("adam_step: gradient shape mismatch for '" + net.params[i].name + "'");
    }
    if (!grads[i].all_finite()) throw NonFiniteError("adam_step: non-finite gradient for '" + net.params[i].name + "'");
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Tensor& theta = net.params[i].value;
    std::vector<double> p = theta.values();
    std::vector<double> m = state.m[i].values();
    std::vector<double> v = state.v[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = grads[i][k] + c.weight_decay * p[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * (g * g);
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    net.params[i].value = Tensor(theta.shape(), std::move(p));
    state.m[i] = Tensor(theta.shape(), std::move(m));
    state.v[i] = Tensor(theta.shape(), std::move(v));
  }
}

}  // namespace icarec::nn
