#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "icarec/autodiff.hpp"

namespace icarec::ad {

using GraphBuilder = std::function<Node(const std::vector<Node>& params)>;

namespace detail {

inline std::vector<Node> as_leaves(const std::vector<Tensor>& params) {
  std::vector<Node> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(leaf(p));
  return leaves;
}

inline double eval_scalar(const GraphBuilder& fn, const std::vector<Tensor>& params) {
  return fn(as_leaves(params)).value().item();
}

}  // namespace detail

/// Largest relative disagreement between backward() and central differences
/// over every coordinate of every parameter:
///   |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
inline double grad_check(const GraphBuilder& fn, const std::vector<Tensor>& params, double h = 1e-6) {
  const std::vector<Node> leaves = detail::as_leaves(params);
  const Node root = fn(leaves);
  const double probe = detail::eval_scalar(fn, params);
  if (std::bit_cast<std::uint64_t>(probe) != std::bit_cast<std::uint64_t>(root.value().item())) {
    throw Error("grad_check: graph builder is not deterministic");
  }
  const Gradients grads = backward(root);

  double worst = 0.0;
  std::vector<Tensor> shifted = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor analytic = grads.contains(leaves[p]) ? grads.of(leaves[p]) : Tensor::zeros(params[p].shape());
    std::vector<double> base = params[p].values();
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<double> v = base;
      v[i] = base[i] + h;
      shifted[p] = Tensor(params[p].shape(), v);
      const double up = detail::eval_scalar(fn, shifted);
      v[i] = base[i] - h;
      shifted[p] = Tensor(params[p].shape(), v);
      const double down = detail::eval_scalar(fn, shifted);
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric)));
    }
    shifted[p] = params[p];
  }
  return worst;
}

}  // namespace icarec::ad
