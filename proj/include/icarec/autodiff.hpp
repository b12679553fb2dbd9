#pragma once

// Reverse-mode automatic differentiation over icarec::Tensor.
//
// A Node is an immutable graph vertex: its value, parents and backward rule
// are fixed at construction. Gradients are accumulated in a map local to each
// backward() call, so graphs can be read from several threads and the same
// graph can be differentiated more than once.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "icarec/error.hpp"
#include "icarec/tensor.hpp"

namespace icarec::ad {

enum class Primitive {
  leaf,
  matmul,
  add,
  sub,
  mul,
  div,
  scale,
  square,
  sqrt,
  log,
  exp,
  abs,
  tanh,
  relu,
  leaky_relu,
  softplus,
  sigmoid,
  softmax,
  log_softmax,
  sum,
  mean,
  concat,
  slice,
  reshape,
  conv1d,
  batchnorm1d,
  frobenius_norm,
  custom,
};

inline std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::leaf: return "leaf";
    case Primitive::matmul: return "matmul";
    case Primitive::add: return "add";
    case Primitive::sub: return "sub";
    case Primitive::mul: return "mul";
    case Primitive::div: return "div";
    case Primitive::scale: return "scale";
    case Primitive::square: return "square";
    case Primitive::sqrt: return "sqrt";
    case Primitive::log: return "log";
    case Primitive::exp: return "exp";
    case Primitive::abs: return "abs";
    case Primitive::tanh: return "tanh";
    case Primitive::relu: return "relu";
    case Primitive::leaky_relu: return "leaky_relu";
    case Primitive::softplus: return "softplus";
    case Primitive::sigmoid: return "sigmoid";
    case Primitive::softmax: return "softmax";
    case Primitive::log_softmax: return "log_softmax";
    case Primitive::sum: return "sum";
    case Primitive::mean: return "mean";
    case Primitive::concat: return "concat";
    case Primitive::slice: return "slice";
    case Primitive::reshape: return "reshape";
    case Primitive::conv1d: return "conv1d";
    case Primitive::batchnorm1d: return "batchnorm1d";
    case Primitive::frobenius_norm: return "frobenius_norm";
    case Primitive::custom: return "custom";
  }
  return "unknown";
}

/// Named primitive attributes: numbers (axis, alpha, eps, ...) or dimension
/// lists (reshape target).
class Attrs {
 public:
  using Value = std::variant<double, Shape>;

  Attrs() = default;
  Attrs(std::initializer_list<std::pair<const std::string, Value>> init) : values_(init) {}

  Attrs& set(const std::string& key, double v) {
    values_[key] = v;
    return *this;
  }
  Attrs& set(const std::string& key, Shape v) {
    values_[key] = std::move(v);
    return *this;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double number(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || !std::holds_alternative<double>(it->second)) {
      throw ConfigError("missing numeric attribute '" + key + "'");
    }
    return std::get<double>(it->second);
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  const Shape& dims(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end() || !std::holds_alternative<Shape>(it->second)) {
      throw ConfigError("missing shape attribute '" + key + "'");
    }
    return std::get<Shape>(it->second);
  }

 private:
  std::map<std::string, Value> values_;
};

/// Backward rule of a user-supplied primitive: returns one gradient per
/// input (an empty Tensor means "no gradient").
using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& grad_out, std::span<const Tensor> inputs, const Tensor& value)>;

class Node;

namespace detail {

struct NodeData {
  Tensor value;
  std::vector<Node> parents;
  Primitive primitive = Primitive::leaf;
  Attrs attrs;
  bool requires_grad = false;
  std::vector<Tensor> saved;
  std::string custom_name;
  BackwardFn custom_backward;
};

}  // namespace detail

class Node {
 public:
  Node() = default;

  bool defined() const noexcept { return data_ != nullptr; }
  const Tensor& value() const { return data_->value; }
  const Shape& shape() const { return data_->value.shape(); }
  bool requires_grad() const { return data_->requires_grad; }
  bool is_leaf() const { return data_->primitive == Primitive::leaf; }
  Primitive primitive() const { return data_->primitive; }
  const std::vector<Node>& parents() const { return data_->parents; }
  const Attrs& attrs() const { return data_->attrs; }
  /// Auxiliary tensors kept by the forward pass (batch statistics, ...).
  const std::vector<Tensor>& saved() const { return data_->saved; }
  const void* id() const noexcept { return data_.get(); }

  friend bool operator==(const Node& a, const Node& b) { return a.data_ == b.data_; }

 private:
  friend Node make_node(std::shared_ptr<detail::NodeData>);
  std::shared_ptr<const detail::NodeData> data_;
};

inline Node make_node(std::shared_ptr<detail::NodeData> d) {
  Node n;
  n.data_ = std::move(d);
  return n;
}

namespace detail {

[[noreturn]] inline void shape_fail(Primitive p, const std::string& msg,
                                    std::initializer_list<Shape> shapes) {
  std::string s = std::string(primitive_name(p)) + ": " + msg + " (shapes";
  for (const auto& sh : shapes) s += " " + shape_str(sh);
  s += ")";
  throw ShapeError(s);
}

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Broadcast rule for binary elementwise ops: equal shapes, one side a
// single element, or one side's shape a trailing suffix of the other's.
// Returns (output shape, lhs is the broadcast side, rhs is the broadcast side).
struct Broadcast {
  Shape out;
  std::size_t lhs_period;
  std::size_t rhs_period;
};

inline Broadcast broadcast(Primitive p, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return {a.shape(), a.numel(), b.numel()};
  if (b.numel() == 1 || is_suffix(b.shape(), a.shape())) return {a.shape(), a.numel(), b.numel()};
  if (a.numel() == 1 || is_suffix(a.shape(), b.shape())) return {b.shape(), a.numel(), b.numel()};
  shape_fail(p, "operands are not broadcast-compatible", {a.shape(), b.shape()});
}

// Sums an output-shaped gradient down to an operand with the given period.
inline Tensor reduce_to(const std::vector<double>& g, const Shape& out_shape, const Shape& operand,
                        std::size_t period) {
  if (period == g.size()) return Tensor(out_shape, g).reshaped(operand);
  std::vector<double> r(period, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) r[i % period] += g[i];
  return Tensor(operand, std::move(r));
}

// Splits a shape around `axis` into (outer, n, inner).
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};
inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

inline std::size_t read_axis(Primitive p, const Attrs& attrs, const Shape& s) {
  const double a = attrs.number("axis");
  const auto r = static_cast<long>(s.size());
  long ax = static_cast<long>(a);
  if (ax < 0) ax += r;
  if (ax < 0 || ax >= r) shape_fail(p, "axis out of range", {s});
  return static_cast<std::size_t>(ax);
}

inline double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ConvGeometry {
  std::size_t batch, cin, cout, len, k;
  long pad;
};

inline ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, const Tensor* bias) {
  ConvGeometry g{};
  if (x.rank() == 1 && w.rank() == 1) {
    g = {1, 1, 1, x.dim(0), w.dim(0), 0};
  } else if (x.rank() == 2 && w.rank() == 3) {
    g = {1, x.dim(0), w.dim(0), x.dim(1), w.dim(2), 0};
    if (w.dim(1) != g.cin) shape_fail(Primitive::conv1d, "input channels differ from kernel", {x.shape(), w.shape()});
  } else if (x.rank() == 3 && w.rank() == 3) {
    g = {x.dim(0), x.dim(1), w.dim(0), x.dim(2), w.dim(2), 0};
    if (w.dim(1) != g.cin) shape_fail(Primitive::conv1d, "input channels differ from kernel", {x.shape(), w.shape()});
  } else {
    shape_fail(Primitive::conv1d, "expected input/kernel ranks (1,1), (2,3) or (3,3)", {x.shape(), w.shape()});
  }
  if (g.k % 2 == 0) shape_fail(Primitive::conv1d, "kernel length must be odd", {w.shape()});
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.cout)) {
    shape_fail(Primitive::conv1d, "bias must have one entry per output channel", {w.shape(), bias->shape()});
  }
  g.pad = static_cast<long>(g.k / 2);
  return g;
}

inline Shape conv_out_shape(const Tensor& x, const ConvGeometry& g) {
  if (x.rank() == 1) return {g.len};
  if (x.rank() == 2) return {g.cout, g.len};
  return {g.batch, g.cout, g.len};
}

// Same-padded stride-1 cross-correlation. Each output element accumulates
// its terms in (input channel, kernel tap) order, then adds the bias.
inline std::vector<double> conv_forward(const Tensor& x, const Tensor& w, const Tensor* bias,
                                        const ConvGeometry& g) {
  std::vector<double> y(g.batch * g.cout * g.len, 0.0);
  const double* xp = x.data().data();
  const double* wp = w.data().data();
  const long len = static_cast<long>(g.len);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.cout; ++o) {
      double* out = &y[(b * g.cout + o) * g.len];
      for (std::size_t c = 0; c < g.cin; ++c) {
        const double* in = xp + (b * g.cin + c) * g.len;
        const double* wk = wp + (o * g.cin + c) * g.k;
        for (std::size_t k = 0; k < g.k; ++k) {
          const long shift = static_cast<long>(k) - g.pad;
          const long t0 = std::max(0L, -shift);
          const long t1 = std::min(len, len - shift);
          const double wv = wk[k];
          for (long t = t0; t < t1; ++t) out[t] += wv * in[t + shift];
        }
      }
      if (bias) {
        const double bv = (*bias)[o];
        for (long t = 0; t < len; ++t) out[t] += bv;
      }
    }
  }
  return y;
}

struct Forward {
  Tensor value;
  std::vector<Tensor> saved;
};

inline Forward forward_kernel(Primitive p, const std::vector<Node>& in, const Attrs& attrs) {
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (in.size() < lo || in.size() > hi) {
      throw ShapeError(std::string(primitive_name(p)) + ": expected " + std::to_string(lo) +
                       (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  auto unary = [&](auto&& f) {
    arity(1, 1);
    return Forward{map(in[0].value(), f), {}};
  };

  switch (p) {
    case Primitive::leaf:
    case Primitive::custom:
      throw Error("forward_kernel: not a computed primitive");

    case Primitive::matmul: {
      arity(2, 2);
      const Tensor& a = in[0].value();
      const Tensor& b = in[1].value();
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        shape_fail(p, "expected (n,k) x (k,m)", {a.shape(), b.shape()});
      }
      const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
      std::vector<double> out(n * m, 0.0);
      const double* ap = a.data().data();
      const double* bp = b.data().data();
      for (std::size_t i = 0; i < n; ++i) {
        double* row = &out[i * m];
        for (std::size_t q = 0; q < k; ++q) {
          const double av = ap[i * k + q];
          const double* brow = bp + q * m;
          for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
        }
      }
      return {Tensor({n, m}, std::move(out)), {}};
    }

    case Primitive::add:
    case Primitive::sub:
    case Primitive::mul:
    case Primitive::div: {
      arity(2, 2);
      const Tensor& a = in[0].value();
      const Tensor& b = in[1].value();
      const Broadcast bc = broadcast(p, a, b);
      const std::size_t n = shape_numel(bc.out);
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i % bc.lhs_period];
        const double y = b[i % bc.rhs_period];
        switch (p) {
          case Primitive::add: out[i] = x + y; break;
          case Primitive::sub: out[i] = x - y; break;
          case Primitive::mul: out[i] = x * y; break;
          default: out[i] = x / y; break;
        }
      }
      return {Tensor(bc.out, std::move(out)), {}};
    }

    case Primitive::scale: {
      const double f = attrs.number("factor");
      return unary([f](double v) { return f * v; });
    }
    case Primitive::square: return unary([](double v) { return v * v; });
    case Primitive::sqrt: return unary([](double v) { return std::sqrt(v); });
    case Primitive::log: return unary([](double v) { return std::log(v); });
    case Primitive::exp: return unary([](double v) { return std::exp(v); });
    case Primitive::abs: return unary([](double v) { return std::abs(v); });
    case Primitive::tanh: return unary([](double v) { return std::tanh(v); });
    case Primitive::relu: return unary([](double v) { return v > 0.0 ? v : 0.0; });
    case Primitive::leaky_relu: {
      const double alpha = attrs.number("alpha");
      return unary([alpha](double v) { return v > 0.0 ? v : alpha * v; });
    }
    case Primitive::softplus: return unary(softplus_scalar);
    case Primitive::sigmoid: return unary(sigmoid_scalar);

    case Primitive::softmax:
    case Primitive::log_softmax: {
      arity(1, 1);
      const Tensor& x = in[0].value();
      const std::size_t k = x.shape().back();
      const std::size_t rows = x.numel() / k;
      std::vector<double> out(x.numel());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * k;
        double mx = xr[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(xr[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < k; ++j) {
          out[r * k + j] = p == Primitive::softmax ? std::exp(xr[j] - lse) : xr[j] - lse;
        }
      }
      return {Tensor(x.shape(), std::move(out)), {}};
    }

    case Primitive::sum:
    case Primitive::mean: {
      arity(1, 1);
      const Tensor& x = in[0].value();
      if (!attrs.has("axis")) {
        double s = 0.0;
        for (double v : x.data()) s += v;
        if (p == Primitive::mean) s /= static_cast<double>(x.numel());
        return {Tensor::scalar(s), {}};
      }
      const std::size_t axis = read_axis(p, attrs, x.shape());
      const AxisSplit sp = split_axis(x.shape(), axis);
      std::vector<double> out(sp.outer * sp.inner, 0.0);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t j = 0; j < sp.n; ++j) {
          const double* src = x.data().data() + (o * sp.n + j) * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += src[i];
        }
      }
      if (p == Primitive::mean) {
        for (double& v : out) v /= static_cast<double>(sp.n);
      }
      Shape s = x.shape();
      s.erase(s.begin() + static_cast<std::ptrdiff_t>(axis));
      if (s.empty()) s = {1};
      return {Tensor(std::move(s), std::move(out)), {}};
    }

    case Primitive::concat: {
      if (in.empty()) throw ShapeError("concat: needs at least one input");
      const Shape& ref = in[0].shape();
      const std::size_t axis = read_axis(p, attrs, ref);
      std::size_t total = 0;
      for (const Node& n : in) {
        const Shape& s = n.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == ref[d];
        if (!ok) shape_fail(p, "inputs differ outside the concat axis", {ref, s});
        total += s[axis];
      }
      Shape out_shape = ref;
      out_shape[axis] = total;
      const AxisSplit osp = split_axis(out_shape, axis);
      std::vector<double> out(shape_numel(out_shape));
      std::size_t offset = 0;
      for (const Node& n : in) {
        const AxisSplit sp = split_axis(n.shape(), axis);
        const double* src = n.value().data().data();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          std::copy_n(src + o * sp.n * sp.inner, sp.n * sp.inner,
                      out.begin() + static_cast<std::ptrdiff_t>((o * osp.n + offset) * osp.inner));
        }
        offset += sp.n;
      }
      return {Tensor(std::move(out_shape), std::move(out)), {}};
    }

    case Primitive::slice: {
      arity(1, 1);
      const Tensor& x = in[0].value();
      const std::size_t axis = read_axis(p, attrs, x.shape());
      const auto start = static_cast<std::size_t>(attrs.number("start"));
      const auto stop = static_cast<std::size_t>(attrs.number("stop"));
      if (start >= stop || stop > x.dim(axis)) shape_fail(p, "invalid slice bounds", {x.shape()});
      const AxisSplit sp = split_axis(x.shape(), axis);
      const std::size_t m = stop - start;
      std::vector<double> out(sp.outer * m * sp.inner);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(x.data().data() + (o * sp.n + start) * sp.inner, m * sp.inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * m * sp.inner));
      }
      Shape s = x.shape();
      s[axis] = m;
      return {Tensor(std::move(s), std::move(out)), {}};
    }

    case Primitive::reshape: {
      arity(1, 1);
      const Shape& target = attrs.dims("shape");
      if (shape_numel(target) != in[0].value().numel()) {
        shape_fail(p, "element count changes", {in[0].shape(), target});
      }
      return {in[0].value().reshaped(target), {}};
    }

    case Primitive::conv1d: {
      arity(2, 3);
      const Tensor* bias = in.size() == 3 ? &in[2].value() : nullptr;
      const ConvGeometry g = conv_geometry(in[0].value(), in[1].value(), bias);
      return {Tensor(conv_out_shape(in[0].value(), g), conv_forward(in[0].value(), in[1].value(), bias, g)), {}};
    }

    case Primitive::batchnorm1d: {
      const bool training = attrs.number_or("training", 1.0) != 0.0;
      arity(training ? 3 : 5, training ? 3 : 5);
      const Tensor& x = in[0].value();
      if (x.rank() != 2 && x.rank() != 3) shape_fail(p, "expected (B,C) or (B,C,T) input", {x.shape()});
      const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.rank() == 3 ? x.dim(2) : 1;
      for (std::size_t i = 1; i < in.size(); ++i) {
        if (in[i].shape() != Shape{ch}) shape_fail(p, "per-channel parameter has wrong shape", {x.shape(), in[i].shape()});
      }
      const double eps = attrs.number_or("eps", 1e-5);
      const Tensor& gamma = in[1].value();
      const Tensor& beta = in[2].value();
      const double count = static_cast<double>(batch * len);
      std::vector<double> mean(ch, 0.0), var(ch, 0.0), inv(ch), unbiased(ch);
      if (training) {
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t t = 0; t < len; ++t) mean[c] += x[(b * ch + c) * len + t];
        for (double& m : mean) m /= count;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t t = 0; t < len; ++t) {
              const double d = x[(b * ch + c) * len + t] - mean[c];
              var[c] += d * d;
            }
        for (std::size_t c = 0; c < ch; ++c) {
          unbiased[c] = count > 1.0 ? var[c] / (count - 1.0) : 0.0;
          var[c] /= count;
        }
      } else {
        for (std::size_t c = 0; c < ch; ++c) {
          mean[c] = in[3].value()[c];
          var[c] = in[4].value()[c];
        }
      }
      for (std::size_t c = 0; c < ch; ++c) inv[c] = 1.0 / std::sqrt(var[c] + eps);
      std::vector<double> xhat(x.numel()), y(x.numel());
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = (b * ch + c) * len + t;
            xhat[i] = (x[i] - mean[c]) * inv[c];
            y[i] = gamma[c] * xhat[i] + beta[c];
          }
      std::vector<Tensor> saved;
      saved.emplace_back(x.shape(), std::move(xhat));
      saved.emplace_back(Shape{ch}, std::move(inv));
      saved.emplace_back(Shape{ch}, std::move(mean));
      saved.emplace_back(Shape{ch}, std::move(unbiased));
      return {Tensor(x.shape(), std::move(y)), std::move(saved)};
    }

    case Primitive::frobenius_norm: {
      arity(1, 1);
      double s = 0.0;
      for (double v : in[0].value().data()) s += v * v;
      return {Tensor::scalar(std::sqrt(s)), {}};
    }
  }
  throw Error("forward_kernel: unhandled primitive");
}

// Gradients for each parent of `node` given the gradient of its output.
// Entries for parents that do not require gradients are left empty.
inline std::vector<std::vector<double>> backward_kernel(const NodeData& node, const std::vector<double>& g) {
  const auto& in = node.parents;
  std::vector<std::vector<double>> out(in.size());
  auto need = [&](std::size_t i) { return in[i].requires_grad(); };
  const Tensor& y = node.value;
  const Primitive p = node.primitive;

  auto unary = [&](auto&& dfdx) {
    if (!need(0)) return;
    const Tensor& x = in[0].value();
    std::vector<double> r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = g[i] * dfdx(x[i], y[i]);
    out[0] = std::move(r);
  };

  switch (p) {
    case Primitive::leaf:
      break;

    case Primitive::custom: {
      std::vector<Tensor> inputs;
      inputs.reserve(in.size());
      for (const Node& n : in) inputs.push_back(n.value());
      const auto grads = node.custom_backward(Tensor(y.shape(), g), inputs, y);
      if (grads.size() != in.size()) {
        throw ShapeError("custom primitive '" + node.custom_name + "' returned wrong number of gradients");
      }
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (!need(i) || grads[i].empty()) continue;
        if (grads[i].shape() != in[i].shape()) {
          throw ShapeError("custom primitive '" + node.custom_name + "' returned gradient of wrong shape");
        }
        out[i] = grads[i].values();
      }
      break;
    }

    case Primitive::matmul: {
      const Tensor& a = in[0].value();
      const Tensor& b = in[1].value();
      const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
      if (need(0)) {
        std::vector<double> ga(n * k, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t q = 0; q < k; ++q) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * b[q * m + j];
            ga[i * k + q] = s;
          }
        out[0] = std::move(ga);
      }
      if (need(1)) {
        std::vector<double> gb(k * m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t q = 0; q < k; ++q) {
            const double av = a[i * k + q];
            for (std::size_t j = 0; j < m; ++j) gb[q * m + j] += av * g[i * m + j];
          }
        out[1] = std::move(gb);
      }
      break;
    }

    case Primitive::add:
    case Primitive::sub:
    case Primitive::mul:
    case Primitive::div: {
      const Tensor& a = in[0].value();
      const Tensor& b = in[1].value();
      const std::size_t pa = a.numel(), pb = b.numel();
      for (std::size_t side = 0; side < 2; ++side) {
        if (!need(side)) continue;
        std::vector<double> full(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double x = a[i % pa];
          const double z = b[i % pb];
          double d = 0.0;
          switch (p) {
            case Primitive::add: d = 1.0; break;
            case Primitive::sub: d = side == 0 ? 1.0 : -1.0; break;
            case Primitive::mul: d = side == 0 ? z : x; break;
            default: d = side == 0 ? 1.0 / z : -x / (z * z); break;
          }
          full[i] = g[i] * d;
        }
        const Tensor& operand = side == 0 ? a : b;
        out[side] = reduce_to(full, y.shape(), operand.shape(), operand.numel()).values();
      }
      break;
    }

    case Primitive::scale: {
      const double f = node.attrs.number("factor");
      unary([f](double, double) { return f; });
      break;
    }
    case Primitive::square: unary([](double x, double) { return 2.0 * x; }); break;
    case Primitive::sqrt: unary([](double, double v) { return 0.5 / v; }); break;
    case Primitive::log: unary([](double x, double) { return 1.0 / x; }); break;
    case Primitive::exp: unary([](double, double v) { return v; }); break;
    case Primitive::abs: unary([](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }); break;
    case Primitive::tanh: unary([](double, double v) { return 1.0 - v * v; }); break;
    case Primitive::relu: unary([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); break;
    case Primitive::leaky_relu: {
      const double alpha = node.attrs.number("alpha");
      unary([alpha](double x, double) { return x > 0.0 ? 1.0 : alpha; });
      break;
    }
    case Primitive::softplus: unary([](double x, double) { return sigmoid_scalar(x); }); break;
    case Primitive::sigmoid: unary([](double, double v) { return v * (1.0 - v); }); break;

    case Primitive::softmax:
    case Primitive::log_softmax: {
      if (!need(0)) break;
      const std::size_t k = y.shape().back();
      const std::size_t rows = y.numel() / k;
      std::vector<double> r(y.numel());
      for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t base = row * k;
        if (p == Primitive::softmax) {
          double dot = 0.0;
          for (std::size_t j = 0; j < k; ++j) dot += g[base + j] * y[base + j];
          for (std::size_t j = 0; j < k; ++j) r[base + j] = y[base + j] * (g[base + j] - dot);
        } else {
          double gs = 0.0;
          for (std::size_t j = 0; j < k; ++j) gs += g[base + j];
          for (std::size_t j = 0; j < k; ++j) r[base + j] = g[base + j] - std::exp(y[base + j]) * gs;
        }
      }
      out[0] = std::move(r);
      break;
    }

    case Primitive::sum:
    case Primitive::mean: {
      if (!need(0)) break;
      const Tensor& x = in[0].value();
      std::vector<double> r(x.numel());
      if (!node.attrs.has("axis")) {
        const double v = p == Primitive::mean ? g[0] / static_cast<double>(x.numel()) : g[0];
        std::fill(r.begin(), r.end(), v);
      } else {
        const std::size_t axis = read_axis(p, node.attrs, x.shape());
        const AxisSplit sp = split_axis(x.shape(), axis);
        const double f = p == Primitive::mean ? 1.0 / static_cast<double>(sp.n) : 1.0;
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t j = 0; j < sp.n; ++j)
            for (std::size_t i = 0; i < sp.inner; ++i) r[(o * sp.n + j) * sp.inner + i] = f * g[o * sp.inner + i];
      }
      out[0] = std::move(r);
      break;
    }

    case Primitive::concat: {
      const std::size_t axis = read_axis(p, node.attrs, y.shape());
      const AxisSplit osp = split_axis(y.shape(), axis);
      std::size_t offset = 0;
      for (std::size_t idx = 0; idx < in.size(); ++idx) {
        const AxisSplit sp = split_axis(in[idx].shape(), axis);
        if (need(idx)) {
          std::vector<double> r(in[idx].value().numel());
          for (std::size_t o = 0; o < sp.outer; ++o) {
            std::copy_n(g.begin() + static_cast<std::ptrdiff_t>((o * osp.n + offset) * osp.inner),
                        sp.n * sp.inner, r.begin() + static_cast<std::ptrdiff_t>(o * sp.n * sp.inner));
          }
          out[idx] = std::move(r);
        }
        offset += sp.n;
      }
      break;
    }

    case Primitive::slice: {
      if (!need(0)) break;
      const Tensor& x = in[0].value();
      const std::size_t axis = read_axis(p, node.attrs, x.shape());
      const auto start = static_cast<std::size_t>(node.attrs.number("start"));
      const AxisSplit sp = split_axis(x.shape(), axis);
      const std::size_t m = y.dim(axis);
      std::vector<double> r(x.numel(), 0.0);
      for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(o * m * sp.inner), m * sp.inner,
                    r.begin() + static_cast<std::ptrdiff_t>((o * sp.n + start) * sp.inner));
      }
      out[0] = std::move(r);
      break;
    }

    case Primitive::reshape:
      if (need(0)) out[0] = g;
      break;

    case Primitive::conv1d: {
      const Tensor& x = in[0].value();
      const Tensor& w = in[1].value();
      const Tensor* bias = in.size() == 3 ? &in[2].value() : nullptr;
      const ConvGeometry geo = conv_geometry(x, w, bias);
      const long len = static_cast<long>(geo.len);
      std::vector<double> gx(need(0) ? x.numel() : 0, 0.0);
      std::vector<double> gw(need(1) ? w.numel() : 0, 0.0);
      for (std::size_t b = 0; b < geo.batch; ++b) {
        for (std::size_t o = 0; o < geo.cout; ++o) {
          const double* go = g.data() + (b * geo.cout + o) * geo.len;
          for (std::size_t c = 0; c < geo.cin; ++c) {
            const double* xin = x.data().data() + (b * geo.cin + c) * geo.len;
            const std::size_t wbase = (o * geo.cin + c) * geo.k;
            for (std::size_t k = 0; k < geo.k; ++k) {
              const long shift = static_cast<long>(k) - geo.pad;
              const long t0 = std::max(0L, -shift);
              const long t1 = std::min(len, len - shift);
              if (need(1)) {
                double s = 0.0;
                for (long t = t0; t < t1; ++t) s += go[t] * xin[t + shift];
                gw[wbase + k] += s;
              }
              if (need(0)) {
                const double wv = w[wbase + k];
                double* gxin = gx.data() + (b * geo.cin + c) * geo.len;
                for (long t = t0; t < t1; ++t) gxin[t + shift] += wv * go[t];
              }
            }
          }
        }
      }
      if (need(0)) out[0] = std::move(gx);
      if (need(1)) out[1] = std::move(gw);
      if (bias && need(2)) {
        std::vector<double> gb(geo.cout, 0.0);
        for (std::size_t b = 0; b < geo.batch; ++b)
          for (std::size_t o = 0; o < geo.cout; ++o) {
            const double* go = g.data() + (b * geo.cout + o) * geo.len;
            double s = 0.0;
            for (long t = 0; t < len; ++t) s += go[t];
            gb[o] += s;
          }
        out[2] = std::move(gb);
      }
      break;
    }

    case Primitive::batchnorm1d: {
      const bool training = node.attrs.number_or("training", 1.0) != 0.0;
      const Tensor& x = in[0].value();
      const Tensor& gamma = in[1].value();
      const Tensor& xhat = node.saved[0];
      const Tensor& inv = node.saved[1];
      const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.rank() == 3 ? x.dim(2) : 1;
      const double count = static_cast<double>(batch * len);
      std::vector<double> sum_g(ch, 0.0), sum_gx(ch, 0.0);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = (b * ch + c) * len + t;
            sum_g[c] += g[i];
            sum_gx[c] += g[i] * xhat[i];
          }
      if (need(0)) {
        std::vector<double> gx(x.numel());
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t i = (b * ch + c) * len + t;
              if (training) {
                gx[i] = gamma[c] * inv[c] / count * (count * g[i] - sum_g[c] - xhat[i] * sum_gx[c]);
              } else {
                gx[i] = g[i] * gamma[c] * inv[c];
              }
            }
        out[0] = std::move(gx);
      }
      if (need(1)) out[1] = sum_gx;
      if (need(2)) out[2] = sum_g;
      break;
    }

    case Primitive::frobenius_norm: {
      if (!need(0)) break;
      const Tensor& x = in[0].value();
      const double norm = y[0];
      std::vector<double> r(x.numel());
      if (norm > 0.0) {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = g[0] * x[i] / norm;
      }
      out[0] = std::move(r);
      break;
    }
  }
  return out;
}

inline void check_finite(const Tensor& t, std::string_view what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + " produced a non-finite value");
}

}  // namespace detail

/// Graph input. Leaves reject non-finite values.
inline Node leaf(Tensor value, bool requires_grad = true) {
  detail::check_finite(value, "leaf");
  auto d = std::make_shared<detail::NodeData>();
  d->value = std::move(value);
  d->requires_grad = requires_grad;
  return make_node(std::move(d));
}

inline Node constant(Tensor value) { return leaf(std::move(value), false); }

/// Same value, cut off from the gradient flow.
inline Node detach(const Node& n) { return constant(n.value()); }

inline Node apply_primitive(Primitive p, std::span<const Node> inputs, const Attrs& attrs = {}) {
  auto d = std::make_shared<detail::NodeData>();
  d->parents.assign(inputs.begin(), inputs.end());
  for (const Node& n : d->parents) {
    if (!n.defined()) throw Error(std::string(primitive_name(p)) + ": undefined input node");
    d->requires_grad = d->requires_grad || n.requires_grad();
  }
  detail::Forward f = detail::forward_kernel(p, d->parents, attrs);
  detail::check_finite(f.value, primitive_name(p));
  d->value = std::move(f.value);
  d->saved = std::move(f.saved);
  d->primitive = p;
  d->attrs = attrs;
  return make_node(std::move(d));
}

inline Node apply_primitive(Primitive p, std::initializer_list<Node> inputs, const Attrs& attrs = {}) {
  return apply_primitive(p, std::span<const Node>(inputs.begin(), inputs.size()), attrs);
}

/// Registers an externally computed value with a caller-supplied backward rule.
inline Node apply_custom(std::string name, std::span<const Node> inputs, Tensor value, BackwardFn backward) {
  detail::check_finite(value, name);
  auto d = std::make_shared<detail::NodeData>();
  d->parents.assign(inputs.begin(), inputs.end());
  for (const Node& n : d->parents) d->requires_grad = d->requires_grad || n.requires_grad();
  d->value = std::move(value);
  d->primitive = Primitive::custom;
  d->custom_name = std::move(name);
  d->custom_backward = std::move(backward);
  return make_node(std::move(d));
}

/// Gradients of one backward pass, keyed by leaf identity.
class Gradients {
 public:
  bool contains(const Node& n) const { return index_.count(n.id()) != 0; }

  const Tensor& of(const Node& n) const {
    auto it = index_.find(n.id());
    if (it == index_.end()) throw Error("no gradient recorded for this node");
    return entries_[it->second].second;
  }

  /// (leaf, gradient) pairs in first-visit order.
  const std::vector<std::pair<Node, Tensor>>& entries() const { return entries_; }

  void add(Node n, Tensor g) {
    index_.emplace(n.id(), entries_.size());
    entries_.emplace_back(std::move(n), std::move(g));
  }

 private:
  std::vector<std::pair<Node, Tensor>> entries_;
  std::unordered_map<const void*, std::size_t> index_;
};

/// d(root)/d(leaf) for every requires-grad leaf reachable from a scalar root.
inline Gradients backward(const Node& root) {
  if (!root.defined()) throw Error("backward: undefined root");
  if (root.value().numel() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + shape_str(root.shape()));
  }
  Gradients result;
  if (!root.requires_grad()) return result;

  // Iterative post-order DFS over the requires-grad subgraph.
  enum : int { kVisiting = 1, kDone = 2 };
  std::unordered_map<const void*, int> state;
  std::vector<Node> order;
  std::vector<std::pair<Node, std::size_t>> stack;
  stack.emplace_back(root, 0);
  state[root.id()] = kVisiting;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& parents = node.parents();
    if (next < parents.size()) {
      const Node parent = parents[next++];
      if (!parent.requires_grad()) continue;
      auto it = state.find(parent.id());
      if (it == state.end()) {
        state[parent.id()] = kVisiting;
        stack.emplace_back(parent, 0);
      } else if (it->second == kVisiting) {
        throw Error("backward: cycle detected in computation graph");
      }
    } else {
      state[node.id()] = kDone;
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<const void*, std::vector<double>> grads;
  grads[root.id()] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& node = *it;
    auto git = grads.find(node.id());
    if (git == grads.end()) continue;
    std::vector<double> g = std::move(git->second);
    grads.erase(git);
    if (node.is_leaf()) {
      result.add(node, Tensor(node.shape(), std::move(g)));
      continue;
    }
    const auto* data = static_cast<const detail::NodeData*>(node.id());
    auto parent_grads = detail::backward_kernel(*data, g);
    const auto& parents = node.parents();
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (!parents[i].requires_grad() || parent_grads[i].empty()) continue;
      auto& acc = grads[parents[i].id()];
      if (acc.empty()) {
        acc = std::move(parent_grads[i]);
      } else {
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += parent_grads[i][j];
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Convenience wrappers.

inline Node matmul(const Node& a, const Node& b) { return apply_primitive(Primitive::matmul, {a, b}); }
inline Node add(const Node& a, const Node& b) { return apply_primitive(Primitive::add, {a, b}); }
inline Node sub(const Node& a, const Node& b) { return apply_primitive(Primitive::sub, {a, b}); }
inline Node mul(const Node& a, const Node& b) { return apply_primitive(Primitive::mul, {a, b}); }
inline Node div(const Node& a, const Node& b) { return apply_primitive(Primitive::div, {a, b}); }
inline Node scale(const Node& a, double factor) {
  return apply_primitive(Primitive::scale, {a}, Attrs{{"factor", factor}});
}
inline Node square(const Node& a) { return apply_primitive(Primitive::square, {a}); }
inline Node sqrt(const Node& a) { return apply_primitive(Primitive::sqrt, {a}); }
inline Node log(const Node& a) { return apply_primitive(Primitive::log, {a}); }
inline Node exp(const Node& a) { return apply_primitive(Primitive::exp, {a}); }
inline Node abs(const Node& a) { return apply_primitive(Primitive::abs, {a}); }
inline Node tanh(const Node& a) { return apply_primitive(Primitive::tanh, {a}); }
inline Node relu(const Node& a) { return apply_primitive(Primitive::relu, {a}); }
inline Node leaky_relu(const Node& a, double alpha) {
  return apply_primitive(Primitive::leaky_relu, {a}, Attrs{{"alpha", alpha}});
}
inline Node softplus(const Node& a) { return apply_primitive(Primitive::softplus, {a}); }
inline Node sigmoid(const Node& a) { return apply_primitive(Primitive::sigmoid, {a}); }
inline Node softmax(const Node& a) { return apply_primitive(Primitive::softmax, {a}); }
inline Node log_softmax(const Node& a) { return apply_primitive(Primitive::log_softmax, {a}); }
inline Node sum(const Node& a) { return apply_primitive(Primitive::sum, {a}); }
inline Node sum(const Node& a, long axis) {
  return apply_primitive(Primitive::sum, {a}, Attrs{{"axis", static_cast<double>(axis)}});
}
inline Node mean(const Node& a) { return apply_primitive(Primitive::mean, {a}); }
inline Node mean(const Node& a, long axis) {
  return apply_primitive(Primitive::mean, {a}, Attrs{{"axis", static_cast<double>(axis)}});
}
inline Node concat(const std::vector<Node>& parts, long axis) {
  return apply_primitive(Primitive::concat, parts, Attrs{{"axis", static_cast<double>(axis)}});
}
inline Node slice(const Node& a, long axis, std::size_t start, std::size_t stop) {
  return apply_primitive(Primitive::slice, {a},
                         Attrs{{"axis", static_cast<double>(axis)},
                               {"start", static_cast<double>(start)},
                               {"stop", static_cast<double>(stop)}});
}
inline Node reshape(const Node& a, Shape shape) {
  return apply_primitive(Primitive::reshape, {a}, Attrs{{"shape", std::move(shape)}});
}
inline Node conv1d(const Node& x, const Node& kernel) { return apply_primitive(Primitive::conv1d, {x, kernel}); }
inline Node conv1d(const Node& x, const Node& kernel, const Node& bias) {
  return apply_primitive(Primitive::conv1d, {x, kernel, bias});
}
inline Node batchnorm1d_train(const Node& x, const Node& gamma, const Node& beta, double eps = 1e-5) {
  return apply_primitive(Primitive::batchnorm1d, {x, gamma, beta}, Attrs{{"eps", eps}, {"training", 1.0}});
}
inline Node batchnorm1d_eval(const Node& x, const Node& gamma, const Node& beta, const Node& running_mean,
                             const Node& running_var, double eps = 1e-5) {
  return apply_primitive(Primitive::batchnorm1d, {x, gamma, beta, running_mean, running_var},
                         Attrs{{"eps", eps}, {"training", 0.0}});
}
inline Node frobenius_norm(const Node& a) { return apply_primitive(Primitive::frobenius_norm, {a}); }

inline Node operator+(const Node& a, const Node& b) { return add(a, b); }
inline Node operator-(const Node& a, const Node& b) { return sub(a, b); }
inline Node operator*(const Node& a, const Node& b) { return mul(a, b); }
inline Node operator/(const Node& a, const Node& b) { return div(a, b); }
inline Node operator*(double f, const Node& a) { return scale(a, f); }
inline Node operator-(const Node& a) { return scale(a, -1.0); }
inline Node operator+(const Node& a, double c) { return add(a, constant(Tensor::scalar(c))); }
inline Node operator-(const Node& a, double c) { return sub(a, constant(Tensor::scalar(c))); }

}  // namespace icarec::ad
