#pragma once

// Declarative network specs (dense / conv1d / batchnorm / condition
// concatenation), Glorot-uniform initialization and the forward pass.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/autodiff.hpp"
#include "icarec/error.hpp"
#include "icarec/rng.hpp"
#include "icarec/tensor.hpp"

namespace icarec::nn {

enum class Activation { identity, tanh, relu, leaky_relu, softplus, sigmoid };
enum class Role { encoder, decoder, discriminator };
enum class ConditionMode { append_features, append_channels };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct Dense {
  std::size_t in = 0, out = 0;
  Activation act = Activation::identity;
};
struct Conv1d {
  std::size_t in_ch = 0, out_ch = 0, kernel = 1;
  Activation act = Activation::identity;
};
struct BatchNorm1d {
  std::size_t ch = 0;
};
/// Appends the condition to the running activation. Numeric conditions
/// contribute `width` features/channels; symbolic ones (classes > 0) are
/// looked up in a learnable classes x width embedding table.
struct ConcatCondition {
  ConditionMode mode = ConditionMode::append_features;
  std::size_t width = 0;
  std::size_t classes = 0;
};

using Layer = std::variant<Dense, Conv1d, BatchNorm1d, ConcatCondition>;

struct NetSpec {
  Role role = Role::encoder;
  std::vector<Layer> layers;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

enum class Mode { train, eval };

struct Net {
  NetSpec spec;
  std::vector<NamedTensor> params;
  /// Batch-norm running statistics; not trained by gradient descent.
  std::vector<NamedTensor> buffers;
  Mode mode = Mode::train;
};

// ---------------------------------------------------------------------------
// Names and JSON.

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::softplus: return "softplus";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  for (Activation a : {Activation::identity, Activation::tanh, Activation::relu, Activation::leaky_relu,
                       Activation::softplus, Activation::sigmoid}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown activation '" + s + "'");
}

inline std::string to_string(Role r) {
  switch (r) {
    case Role::encoder: return "encoder";
    case Role::decoder: return "decoder";
    case Role::discriminator: return "discriminator";
  }
  return "encoder";
}

inline Role role_from_string(const std::string& s) {
  if (s == "encoder") return Role::encoder;
  if (s == "decoder") return Role::decoder;
  if (s == "discriminator") return Role::discriminator;
  throw ConfigError("unknown role '" + s + "'");
}

namespace detail {

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const char* k : required) {
    if (!j.contains(k)) throw ConfigError(where + ": missing key '" + k + "'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required) known = known || it.key() == k;
    for (const char* k : optional) known = known || it.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace detail

inline nlohmann::json layer_to_json(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> nlohmann::json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Dense>) {
          return {{"type", "dense"}, {"in", l.in}, {"out", l.out}, {"activation", to_string(l.act)}};
        } else if constexpr (std::is_same_v<T, Conv1d>) {
          return {{"type", "conv1d"}, {"in_ch", l.in_ch}, {"out_ch", l.out_ch}, {"kernel", l.kernel},
                  {"activation", to_string(l.act)}};
        } else if constexpr (std::is_same_v<T, BatchNorm1d>) {
          return {{"type", "batchnorm1d"}, {"ch", l.ch}};
        } else {
          return {{"type", "concat_condition"},
                  {"mode", l.mode == ConditionMode::append_features ? "append_features" : "append_channels"},
                  {"width", l.width},
                  {"classes", l.classes}};
        }
      },
      layer);
}

inline Layer layer_from_json(const nlohmann::json& j, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  if (!j.is_object() || !j.contains("type")) throw ConfigError(where + ": missing key 'type'");
  const std::string type = j.at("type").get<std::string>();
  try {
    if (type == "dense") {
      detail::require_keys(j, {"type", "in", "out"}, {"activation"}, where);
      return Dense{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                   activation_from_string(j.value("activation", "identity"))};
    }
    if (type == "conv1d") {
      detail::require_keys(j, {"type", "in_ch", "out_ch", "kernel"}, {"activation"}, where);
      return Conv1d{j.at("in_ch").get<std::size_t>(), j.at("out_ch").get<std::size_t>(),
                    j.at("kernel").get<std::size_t>(), activation_from_string(j.value("activation", "identity"))};
    }
    if (type == "batchnorm1d") {
      detail::require_keys(j, {"type", "ch"}, {}, where);
      return BatchNorm1d{j.at("ch").get<std::size_t>()};
    }
    if (type == "concat_condition") {
      detail::require_keys(j, {"type", "mode", "width"}, {"classes"}, where);
      const std::string mode = j.at("mode").get<std::string>();
      if (mode != "append_features" && mode != "append_channels") {
        throw ConfigError(where + ": unknown condition mode '" + mode + "'");
      }
      return ConcatCondition{mode == "append_features" ? ConditionMode::append_features : ConditionMode::append_channels,
                             j.at("width").get<std::size_t>(), j.value("classes", std::size_t{0})};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown layer type '" + type + "'");
}

inline nlohmann::json spec_to_json(const NetSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : spec.layers) layers.push_back(layer_to_json(l));
  return {{"role", to_string(spec.role)}, {"layers", layers}};
}

inline NetSpec spec_from_json(const nlohmann::json& j) {
  detail::require_keys(j, {"role", "layers"}, {}, "net spec");
  NetSpec spec;
  spec.role = role_from_string(j.at("role").get<std::string>());
  std::size_t i = 0;
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l, i++));
  return spec;
}

// ---------------------------------------------------------------------------
// Validation and construction.

/// Input layout a spec expects: flat features (B, F) or channels (B, C, T).
enum class Layout { features, channels };

struct SpecShape {
  Layout layout = Layout::features;
  std::size_t input_width = 0;
  std::size_t output_width = 0;
  std::optional<ConcatCondition> condition;
};

/// Checks that layer widths chain; returns the input/output widths.
inline SpecShape validate(const NetSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("net spec has no layers");
  SpecShape out;
  std::size_t width = 0;
  std::size_t conditions = 0;
  std::size_t first = 0;
  if (const auto* cc = std::get_if<ConcatCondition>(&spec.layers[0])) {
    // A leading condition: the input width is what the next layer expects
    // minus the condition width.
    if (spec.layers.size() < 2) throw ConfigError("layer 0: concat_condition needs a following layer");
    std::size_t next_in = 0;
    if (const auto* d = std::get_if<Dense>(&spec.layers[1])) {
      out.layout = Layout::features;
      next_in = d->in;
    } else if (const auto* c = std::get_if<Conv1d>(&spec.layers[1])) {
      out.layout = Layout::channels;
      next_in = c->in_ch;
    } else {
      throw ConfigError("layer 1: a leading concat_condition must be followed by dense or conv1d");
    }
    if (next_in <= cc->width) throw ConfigError("layer 1: input width too small for the condition width");
    out.input_width = next_in - cc->width;
    width = out.input_width;
    first = 1;
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string where = "layer " + std::to_string(i);
    const Layer& layer = spec.layers[i];
    auto expect = [&](Layout layout, std::size_t in) {
      if (i == 0 && first == 0) {
        out.layout = layout;
        out.input_width = in;
        width = in;
      }
      if (layout != out.layout) throw ConfigError(where + ": cannot mix dense and convolutional layers");
      if (in != width) {
        throw ConfigError(where + ": expects width " + std::to_string(in) + " but previous layer gives " +
                          std::to_string(width));
      }
    };
    if (const auto* d = std::get_if<Dense>(&layer)) {
      if (d->in == 0 || d->out == 0) throw ConfigError(where + ": dense widths must be positive");
      expect(Layout::features, d->in);
      width = d->out;
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      if (c->in_ch == 0 || c->out_ch == 0) throw ConfigError(where + ": channel counts must be positive");
      if (c->kernel % 2 == 0) throw ConfigError(where + ": conv1d kernel length must be odd");
      expect(Layout::channels, c->in_ch);
      width = c->out_ch;
    } else if (const auto* b = std::get_if<BatchNorm1d>(&layer)) {
      if (i == 0) throw ConfigError(where + ": batchnorm1d cannot be the first layer");
      if (b->ch != width) {
        throw ConfigError(where + ": batchnorm1d has " + std::to_string(b->ch) + " channels, previous layer gives " +
                          std::to_string(width));
      }
    } else {
      const auto& cc = std::get<ConcatCondition>(layer);
      if (cc.width == 0) throw ConfigError(where + ": condition width must be positive");
      const Layout need = cc.mode == ConditionMode::append_features ? Layout::features : Layout::channels;
      if (need != out.layout) throw ConfigError(where + ": condition mode does not match the layer layout");
      if (cc.classes > 0 && cc.mode == ConditionMode::append_channels) {
        throw ConfigError(where + ": symbolic conditions are only supported with append_features");
      }
      ++conditions;
      out.condition = cc;
      width += cc.width;
    }
  }
  if (spec.role == Role::decoder && conditions != 1) {
    throw ConfigError("decoder spec must contain exactly one concat_condition, found " + std::to_string(conditions));
  }
  if (conditions > 1) throw ConfigError("net spec contains more than one concat_condition");
  out.output_width = width;
  return out;
}

inline Tensor glorot_uniform(Rng& rng, Shape shape, double fan_in, double fan_out) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-a, a);
  return Tensor(std::move(shape), std::move(v));
}

inline std::string layer_name(std::size_t i, const char* what) { return "layer" + std::to_string(i) + "." + what; }

inline Net build_net(const NetSpec& spec, std::uint64_t seed) {
  validate(spec);
  Net net;
  net.spec = spec;
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (const auto* d = std::get_if<Dense>(&layer)) {
      net.params.push_back({layer_name(i, "weight"), glorot_uniform(rng, {d->in, d->out}, double(d->in), double(d->out))});
      net.params.push_back({layer_name(i, "bias"), Tensor::zeros({d->out})});
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      const double k = static_cast<double>(c->kernel);
      net.params.push_back({layer_name(i, "weight"),
                            glorot_uniform(rng, {c->out_ch, c->in_ch, c->kernel}, double(c->in_ch) * k, double(c->out_ch) * k)});
      net.params.push_back({layer_name(i, "bias"), Tensor::zeros({c->out_ch})});
    } else if (const auto* b = std::get_if<BatchNorm1d>(&layer)) {
      net.params.push_back({layer_name(i, "gamma"), Tensor::ones({b->ch})});
      net.params.push_back({layer_name(i, "beta"), Tensor::zeros({b->ch})});
      net.buffers.push_back({layer_name(i, "running_mean"), Tensor::zeros({b->ch})});
      net.buffers.push_back({layer_name(i, "running_var"), Tensor::ones({b->ch})});
    } else {
      const auto& cc = std::get<ConcatCondition>(layer);
      if (cc.classes > 0) {
        net.params.push_back({layer_name(i, "embedding"),
                              glorot_uniform(rng, {cc.classes, cc.width}, double(cc.classes), double(cc.width))});
      }
    }
  }
  return net;
}

inline std::size_t param_count(const Net& net) {
  std::size_t n = 0;
  for (const auto& p : net.params) n += p.value.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Forward pass.

/// Conditioning input: numeric values, or class indices for symbolic
/// conditions.
struct Condition {
  std::optional<ad::Node> values;
  std::vector<std::size_t> classes;

  static Condition numeric(ad::Node v) { return Condition{std::move(v), {}}; }
  static Condition symbolic(std::vector<std::size_t> c) { return Condition{std::nullopt, std::move(c)}; }
};

struct NetOutput {
  ad::Node output;
  /// Graph leaves for net.params, in the same order.
  std::vector<ad::Node> params;
  /// Running statistics after this batch (train mode only, else empty).
  std::vector<Tensor> updated_buffers;
};

inline ad::Node activate(const ad::Node& x, Activation act) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x, kLeakySlope);
    case Activation::softplus: return ad::softplus(x);
    case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

/// Runs the network on caller-supplied parameter nodes, one per
/// net.params entry with the same shape.
inline NetOutput forward(const Net& net, std::vector<ad::Node> params, const ad::Node& input,
                         const Condition* condition = nullptr) {
  if (params.size() != net.params.size()) throw ShapeError("forward: parameter node count differs from the net");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != net.params[i].value.shape()) {
      throw ShapeError("forward: parameter node shape mismatch for '" + net.params[i].name + "'");
    }
  }
  const SpecShape shape = validate(net.spec);
  if (shape.condition.has_value() != (condition != nullptr)) {
    throw ShapeError(shape.condition ? "network requires a condition" : "network takes no condition");
  }
  const Shape& in_shape = input.shape();
  const std::size_t rank = shape.layout == Layout::features ? 2 : 3;
  if (in_shape.size() != rank || in_shape[1] != shape.input_width) {
    throw ShapeError("network input has shape " + shape_str(in_shape) + ", expected " +
                     (rank == 2 ? "(B," : "(B,") + std::to_string(shape.input_width) + (rank == 2 ? ")" : ",T)"));
  }
  const std::size_t batch = in_shape[0];

  NetOutput out;
  out.params = std::move(params);
  const bool training = net.mode == Mode::train;

  ad::Node h = input;
  std::size_t pi = 0, bi = 0;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    const Layer& layer = net.spec.layers[i];
    if (const auto* d = std::get_if<Dense>(&layer)) {
      h = activate(ad::matmul(h, out.params[pi]) + out.params[pi + 1], d->act);
      pi += 2;
    } else if (const auto* c = std::get_if<Conv1d>(&layer)) {
      h = activate(ad::conv1d(h, out.params[pi], out.params[pi + 1]), c->act);
      pi += 2;
    } else if (std::holds_alternative<BatchNorm1d>(layer)) {
      const ad::Node& gamma = out.params[pi];
      const ad::Node& beta = out.params[pi + 1];
      const Tensor& rm = net.buffers[bi].value;
      const Tensor& rv = net.buffers[bi + 1].value;
      if (training) {
        h = ad::batchnorm1d_train(h, gamma, beta, kBatchNormEps);
        const Tensor& mean = h.saved()[2];
        const Tensor& var = h.saved()[3];
        std::vector<double> nm(rm.numel()), nv(rv.numel());
        for (std::size_t k = 0; k < nm.size(); ++k) {
          nm[k] = kBatchNormMomentum * rm[k] + (1.0 - kBatchNormMomentum) * mean[k];
          nv[k] = kBatchNormMomentum * rv[k] + (1.0 - kBatchNormMomentum) * var[k];
        }
        out.updated_buffers.emplace_back(rm.shape(), std::move(nm));
        out.updated_buffers.emplace_back(rv.shape(), std::move(nv));
      } else {
        h = ad::batchnorm1d_eval(h, gamma, beta, ad::constant(rm), ad::constant(rv), kBatchNormEps);
      }
      pi += 2;
      bi += 2;
    } else {
      const auto& cc = std::get<ConcatCondition>(layer);
      ad::Node cond;
      if (cc.classes > 0) {
        if (condition->classes.size() != batch) {
          throw ShapeError("symbolic condition needs one class index per sample");
        }
        std::vector<double> onehot(batch * cc.classes, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
          if (condition->classes[b] >= cc.classes) throw ShapeError("condition class index out of range");
          onehot[b * cc.classes + condition->classes[b]] = 1.0;
        }
        cond = ad::matmul(ad::constant(Tensor({batch, cc.classes}, std::move(onehot))), out.params[pi]);
        ++pi;
      } else {
        if (!condition->values) throw ShapeError("numeric condition values missing");
        cond = *condition->values;
        const Shape& cs = cond.shape();
        const bool ok = cc.mode == ConditionMode::append_features
                            ? cs == Shape{batch, cc.width}
                            : cs == Shape{batch, cc.width, h.shape()[2]};
        if (!ok) throw ShapeError("condition has shape " + shape_str(cs) + ", incompatible with layer " + std::to_string(i));
      }
      h = ad::concat({h, cond}, 1);
    }
  }
  out.output = h;
  return out;
}

/// Runs the network. With `track_grads` false the parameters enter the
/// graph as constants, so backward() never reaches them.
inline NetOutput forward(const Net& net, const ad::Node& input, const Condition* condition = nullptr,
                         bool track_grads = true) {
  std::vector<ad::Node> params;
  params.reserve(net.params.size());
  for (const auto& p : net.params) params.push_back(track_grads ? ad::leaf(p.value) : ad::constant(p.value));
  return forward(net, std::move(params), input, condition);
}

inline ad::Node apply(const Net& net, const ad::Node& input, const Condition* condition = nullptr) {
  return forward(net, input, condition, false).output;
}

/// Adopts the running statistics produced by a training-mode forward pass.
inline void commit_buffers(Net& net, const NetOutput& out) {
  if (out.updated_buffers.empty()) return;
  for (std::size_t i = 0; i < net.buffers.size(); ++i) net.buffers[i].value = out.updated_buffers[i];
}

// ---------------------------------------------------------------------------
// Stock architectures.

/// MLP with `hidden` layers of `units` units, the activation after each
/// hidden layer and a linear output. A condition, when given, is joined to
/// the input before the first layer.
inline NetSpec mlp_spec(Role role, std::size_t in, std::size_t out, std::size_t hidden, std::size_t units,
                        Activation act, std::optional<ConcatCondition> condition = std::nullopt) {
  NetSpec spec;
  spec.role = role;
  std::size_t width = in;
  if (condition) {
    spec.layers.push_back(*condition);
    width += condition->width;
  }
  for (std::size_t i = 0; i < hidden; ++i) {
    spec.layers.push_back(Dense{width, units, act});
    width = units;
  }
  spec.layers.push_back(Dense{width, out, Activation::identity});
  return spec;
}

/// Convolutional encoder for multichannel signals: 8-channel tanh convs with
/// kernels 3, 5, (BN), 3, (BN), 11, 13 and a final tanh conv to `code_ch`.
inline NetSpec conv_encoder_spec(std::size_t in_ch, std::size_t code_ch, Role role = Role::encoder) {
  NetSpec spec;
  spec.role = role;
  spec.layers = {Conv1d{in_ch, 8, 3, Activation::tanh}, Conv1d{8, 8, 5, Activation::tanh}, BatchNorm1d{8},
                 Conv1d{8, 8, 3, Activation::tanh},     BatchNorm1d{8},                   Conv1d{8, 8, 11, Activation::tanh},
                 Conv1d{8, 8, 13, Activation::tanh},    Conv1d{8, code_ch, 3, Activation::tanh}};
  return spec;
}

/// Matching decoder: the reference channels are appended to the code, then
/// 8-channel tanh convs with kernels 3, 13, 3, 5 and a tanh conv to `out_ch`.
inline NetSpec conv_decoder_spec(std::size_t code_ch, std::size_t cond_ch, std::size_t out_ch) {
  NetSpec spec;
  spec.role = Role::decoder;
  const std::size_t in = code_ch + cond_ch;
  spec.layers = {ConcatCondition{ConditionMode::append_channels, cond_ch, 0},
                 Conv1d{in, 8, 3, Activation::tanh},
                 Conv1d{8, 8, 13, Activation::tanh},
                 Conv1d{8, 8, 3, Activation::tanh},
                 Conv1d{8, 8, 5, Activation::tanh},
                 Conv1d{8, out_ch, 3, Activation::tanh}};
  return spec;
}

}  // namespace icarec::nn
