#pragma once

// Checkpoint document:
//   {"spec": {...}, "params": [{"name", "shape", "data"}...],
//    "buffers": [{"name", "shape", "data"}...],
//    "adam": {"lr", "beta1", "beta2", "eps", "weight_decay", "step", "m": [[...]], "v": [[...]]}}
// Doubles are written in shortest round-trip form, so reloading is bit-exact.

#include <filesystem>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "icarec/adam.hpp"
#include "icarec/io.hpp"
#include "icarec/nn.hpp"

namespace icarec::nn {

namespace detail {

inline nlohmann::json tensors_to_json(const std::vector<NamedTensor>& ts) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& t : ts) a.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"data", t.value.values()}});
  return a;
}

inline Tensor tensor_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("shape") || !j.contains("data")) throw ConfigError(where + ": tensor needs 'shape' and 'data'");
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline void load_named(const nlohmann::json& arr, std::vector<NamedTensor>& into, const std::string& what) {
  if (!arr.is_array() || arr.size() != into.size()) {
    throw ConfigError("checkpoint " + what + ": expected " + std::to_string(into.size()) + " entries");
  }
  for (std::size_t i = 0; i < into.size(); ++i) {
    const auto& e = arr[i];
    const std::string name = e.value("name", "");
    if (name != into[i].name) {
      throw ConfigError("checkpoint " + what + " " + std::to_string(i) + ": name '" + name + "' does not match spec ('" +
                        into[i].name + "')");
    }
    Tensor t = tensor_from_json(e, "checkpoint " + what + " '" + name + "'");
    if (t.shape() != into[i].value.shape()) {
      throw ConfigError("checkpoint " + what + " '" + name + "': shape " + shape_str(t.shape()) + " does not match spec " +
                        shape_str(into[i].value.shape()));
    }
    into[i].value = std::move(t);
  }
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Net& net, const AdamState& adam) {
  nlohmann::json m = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& t : adam.m) m.push_back(t.values());
  for (const auto& t : adam.v) v.push_back(t.values());
  return {{"spec", spec_to_json(net.spec)},
          {"params", detail::tensors_to_json(net.params)},
          {"buffers", detail::tensors_to_json(net.buffers)},
          {"adam",
           {{"lr", adam.config.lr},
            {"beta1", adam.config.beta1},
            {"beta2", adam.config.beta2},
            {"eps", adam.config.eps},
            {"weight_decay", adam.config.weight_decay},
            {"step", adam.step},
            {"m", m},
            {"v", v}}}};
}

inline std::pair<Net, AdamState> checkpoint_from_json(const nlohmann::json& j) {
  detail::require_keys(j, {"spec", "params", "adam"}, {"buffers", "provenance"}, "checkpoint");
  Net net = build_net(spec_from_json(j.at("spec")), 0);
  detail::load_named(j.at("params"), net.params, "param");
  if (j.contains("buffers")) detail::load_named(j.at("buffers"), net.buffers, "buffer");

  const auto& a = j.at("adam");
  detail::require_keys(a, {"lr", "beta1", "beta2", "eps", "step", "m", "v"}, {"weight_decay"}, "checkpoint adam");
  AdamState adam;
  try {
    adam.config = AdamConfig{a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                             a.at("eps").get<double>(), a.value("weight_decay", 0.0)};
    adam.step = a.at("step").get<std::uint64_t>();
    const auto& m = a.at("m");
    const auto& v = a.at("v");
    if (m.size() != net.params.size() || v.size() != net.params.size()) {
      throw ConfigError("checkpoint adam: moment count does not match parameter count");
    }
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      const Shape& s = net.params[i].value.shape();
      adam.m.emplace_back(s, m[i].get<std::vector<double>>());
      adam.v.emplace_back(s, v[i].get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint adam: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("checkpoint adam: ") + e.what());
  }
  return {std::move(net), std::move(adam)};
}

/// `provenance`, when not null, is stored alongside and ignored on load.
inline void save_checkpoint(const Net& net, const AdamState& adam, const std::filesystem::path& path,
                            const nlohmann::json& provenance = nullptr) {
  nlohmann::json j = checkpoint_to_json(net, adam);
  if (!provenance.is_null()) j["provenance"] = provenance;
  io::write_file_atomic(path, j.dump() + "\n");
}

inline std::pair<Net, AdamState> load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(io::read_json(path));
}

}  // namespace icarec::nn
