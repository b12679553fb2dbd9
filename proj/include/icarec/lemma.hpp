#pragma once

// Exact checker for recovery of S from a code S' on finite systems.
// A system is a joint p(s, t) plus three lookup tables:
//   mixing  f(s, t) -> x
//   encoder E(x)    -> s'
//   decoder D(s', t) -> x_hat
// Premises (exact reconstruction, S' independent of T) and the conclusion
// I(S;S') = H(S) = H(S') are reported separately.
//
// JSON form:
//   {"p": [[...]], "mixing": [[...]], "encoder": [...], "decoder": [[...]]}
// Table entries are nonnegative integers or null where undefined.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/infometrics.hpp"
#include "icarec/io.hpp"

namespace icarec::info {

inline constexpr long kUndefined = -1;
inline constexpr double kIndependenceTolerance = 1e-12;
inline constexpr double kConclusionTolerance = 1e-9;

struct DiscreteSystem {
  DiscreteJoint joint;                        // |S| x |T|
  std::vector<std::vector<long>> mixing;      // [s][t] -> x
  std::vector<long> encoder;                  // [x] -> s'
  std::vector<std::vector<long>> decoder;     // [s'][t] -> x_hat
};

namespace detail {

inline std::string cell(const std::string& table, std::size_t i) { return table + "[" + std::to_string(i) + "]"; }
inline std::string cell(const std::string& table, std::size_t i, std::size_t j) {
  return table + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

inline long lookup(const std::vector<long>& t, long i, const std::string& name) {
  if (i < 0 || static_cast<std::size_t>(i) >= t.size() || t[static_cast<std::size_t>(i)] == kUndefined) {
    throw ConfigError("system: " + cell(name, static_cast<std::size_t>(i)) + " is undefined on a reachable input");
  }
  return t[static_cast<std::size_t>(i)];
}

inline long lookup(const std::vector<std::vector<long>>& t, long i, std::size_t j, const std::string& name) {
  if (i < 0 || static_cast<std::size_t>(i) >= t.size() || j >= t[static_cast<std::size_t>(i)].size() ||
      t[static_cast<std::size_t>(i)][j] == kUndefined) {
    throw ConfigError("system: " + cell(name, static_cast<std::size_t>(i), j) + " is undefined on a reachable input");
  }
  return t[static_cast<std::size_t>(i)][j];
}

inline long table_entry(const nlohmann::json& v, const std::string& where) {
  if (v.is_null()) return kUndefined;
  if (!v.is_number_integer() || v.get<long>() < 0) {
    throw ConfigError("system: " + where + " must be a nonnegative integer or null");
  }
  return v.get<long>();
}

}  // namespace detail

/// Checks table totality on reachable inputs and injectivity of f on
/// positive-probability pairs; throws naming the first violated cell.
inline void validate(const DiscreteSystem& sys) {
  const auto& j = sys.joint;
  if (sys.mixing.size() != j.rows) throw ConfigError("system: mixing has wrong row count");
  std::map<long, std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t s = 0; s < j.rows; ++s) {
    if (sys.mixing[s].size() != j.cols) throw ConfigError("system: " + detail::cell("mixing", s) + " has wrong length");
    for (std::size_t t = 0; t < j.cols; ++t) {
      if (j.at(s, t) <= 0.0) continue;
      const long x = sys.mixing[s][t];
      if (x == kUndefined) throw ConfigError("system: " + detail::cell("mixing", s, t) + " undefined on a positive-probability pair");
      const auto [it, fresh] = seen.emplace(x, std::make_pair(s, t));
      if (!fresh) {
        throw ConfigError("system: " + detail::cell("mixing", s, t) + " repeats the value of " +
                          detail::cell("mixing", it->second.first, it->second.second) + "; f is not injective");
      }
      const long code = detail::lookup(sys.encoder, x, "encoder");
      detail::lookup(sys.decoder, code, t, "decoder");
    }
  }
}

struct LemmaReport {
  bool premise_reconstruction = false;
  bool premise_independence = false;
  std::string reconstruction_failure;
  double h_s = 0, h_s_prime = 0, i_s_s_prime = 0;
  double h_x = 0, h_x_given_code_t = 0, h_s_given_s_prime = 0;
  double i_x_xhat = 0, i_x_code_t = 0;
  std::optional<bool> conclusion_holds;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"premise_reconstruction", premise_reconstruction},
                        {"premise_independence", premise_independence},
                        {"H_S", h_s},
                        {"H_S_prime", h_s_prime},
                        {"I_S_S_prime", i_s_s_prime},
                        {"H_X", h_x},
                        {"H_X_given_S_prime_T", h_x_given_code_t},
                        {"H_S_given_S_prime", h_s_given_s_prime},
                        {"I_X_Xhat", i_x_xhat},
                        {"I_X_S_prime_T", i_x_code_t},
                        {"units", "bits"}};
    j["conclusion_holds"] = conclusion_holds ? nlohmann::json(*conclusion_holds) : nlohmann::json(nullptr);
    if (!reconstruction_failure.empty()) j["reconstruction_failure"] = reconstruction_failure;
    return j;
  }
};

inline LemmaReport lemma_check(const DiscreteSystem& sys) {
  validate(sys);
  const auto& j = sys.joint;
  LemmaReport r;
  r.premise_reconstruction = true;
  std::vector<Outcome> s_code, code_t, x_code_t, x_xhat, x_only;
  for (std::size_t s = 0; s < j.rows; ++s)
    for (std::size_t t = 0; t < j.cols; ++t) {
      const double p = j.at(s, t);
      if (p <= 0.0) continue;
      const long x = sys.mixing[s][t];
      const long code = sys.encoder[static_cast<std::size_t>(x)];
      const long xhat = sys.decoder[static_cast<std::size_t>(code)][t];
      if (xhat != x && r.premise_reconstruction) {
        r.premise_reconstruction = false;
        r.reconstruction_failure = "D(E(f(" + std::to_string(s) + ", " + std::to_string(t) + ")), " +
                                   std::to_string(t) + ") = " + std::to_string(xhat) + " but f = " + std::to_string(x);
      }
      const long pair_code_t = code * static_cast<long>(j.cols) + static_cast<long>(t);
      s_code.push_back({static_cast<long>(s), code, p});
      code_t.push_back({code, static_cast<long>(t), p});
      x_code_t.push_back({x, pair_code_t, p});
      x_xhat.push_back({x, xhat, p});
      x_only.push_back({x, 0, p});
    }

  const DiscreteJoint jct = joint_of(code_t);
  const auto pc = jct.marginal_rows(), pt = jct.marginal_cols();
  r.premise_independence = true;
  for (std::size_t a = 0; a < jct.rows; ++a)
    for (std::size_t b = 0; b < jct.cols; ++b)
      if (std::abs(jct.at(a, b) - pc[a] * pt[b]) > kIndependenceTolerance) r.premise_independence = false;

  const DiscreteJoint jsc = joint_of(s_code);
  r.h_s = detail::plogp_sum(jsc.marginal_rows());
  r.h_s_prime = detail::plogp_sum(jsc.marginal_cols());
  r.i_s_s_prime = mutual_information_discrete(jsc);
  r.h_s_given_s_prime = conditional_entropy(jsc, Given::cols);
  r.h_x = joint_entropy(joint_of(x_only));
  const DiscreteJoint jxct = joint_of(x_code_t);
  r.h_x_given_code_t = conditional_entropy(jxct, Given::cols);
  r.i_x_code_t = mutual_information_discrete(jxct);
  r.i_x_xhat = mutual_information_discrete(joint_of(x_xhat));

  if (r.premise_reconstruction && r.premise_independence) {
    r.conclusion_holds = std::abs(r.i_s_s_prime - r.h_s) <= kConclusionTolerance &&
                         std::abs(r.h_s - r.h_s_prime) <= kConclusionTolerance;
  }
  return r;
}

inline DiscreteSystem system_from_json(const nlohmann::json& js) {
  if (!js.is_object()) throw ConfigError("system: expected a JSON object");
  for (const auto& [k, v] : js.items()) {
    if (k != "p" && k != "mixing" && k != "encoder" && k != "decoder") throw ConfigError("system: unknown key '" + k + "'");
  }
  for (const char* k : {"p", "mixing", "encoder", "decoder"}) {
    if (!js.contains(k)) throw ConfigError(std::string("system: missing key '") + k + "'");
  }
  DiscreteSystem sys;
  try {
    sys.joint = DiscreteJoint::from_rows(js.at("p").get<std::vector<std::vector<double>>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("system: p: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("system: p: ") + e.what());
  }
  auto table2 = [](const nlohmann::json& t, const std::string& name) {
    if (!t.is_array()) throw ConfigError("system: " + name + " must be an array of arrays");
    std::vector<std::vector<long>> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!t[i].is_array()) throw ConfigError("system: " + detail::cell(name, i) + " must be an array");
      std::vector<long> row;
      for (std::size_t k = 0; k < t[i].size(); ++k) row.push_back(detail::table_entry(t[i][k], detail::cell(name, i, k)));
      out.push_back(std::move(row));
    }
    return out;
  };
  sys.mixing = table2(js.at("mixing"), "mixing");
  sys.decoder = table2(js.at("decoder"), "decoder");
  const auto& enc = js.at("encoder");
  if (!enc.is_array()) throw ConfigError("system: encoder must be an array");
  for (std::size_t i = 0; i < enc.size(); ++i) sys.encoder.push_back(detail::table_entry(enc[i], detail::cell("encoder", i)));
  validate(sys);
  return sys;
}

inline nlohmann::json system_to_json(const DiscreteSystem& sys) {
  std::vector<std::vector<double>> p(sys.joint.rows, std::vector<double>(sys.joint.cols));
  for (std::size_t a = 0; a < sys.joint.rows; ++a)
    for (std::size_t b = 0; b < sys.joint.cols; ++b) p[a][b] = sys.joint.at(a, b);
  auto ent = [](long v) { return v == kUndefined ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json mixing = nlohmann::json::array(), decoder = nlohmann::json::array(), encoder = nlohmann::json::array();
  for (const auto& row : sys.mixing) {
    nlohmann::json r = nlohmann::json::array();
    for (long v : row) r.push_back(ent(v));
    mixing.push_back(r);
  }
  for (const auto& row : sys.decoder) {
    nlohmann::json r = nlohmann::json::array();
    for (long v : row) r.push_back(ent(v));
    decoder.push_back(r);
  }
  for (long v : sys.encoder) encoder.push_back(ent(v));
  return {{"p", p}, {"mixing", mixing}, {"encoder", encoder}, {"decoder", decoder}};
}

inline DiscreteSystem load_system(const std::filesystem::path& path) { return system_from_json(io::read_json(path)); }

// Stock two-bit systems: S, T uniform bits, x = 2 s + t.

inline DiscreteSystem projection_system() {
  return {DiscreteJoint(2, 2, {0.25, 0.25, 0.25, 0.25}), {{0, 1}, {2, 3}}, {0, 0, 1, 1}, {{0, 1}, {2, 3}}};
}

/// E(x) = s xor t, D(s', t) = f(s' xor t, t).
inline DiscreteSystem xor_system() {
  return {DiscreteJoint(2, 2, {0.25, 0.25, 0.25, 0.25}), {{0, 1}, {2, 3}}, {0, 1, 1, 0}, {{0, 3}, {2, 1}}};
}

inline DiscreteSystem constant_encoder_system() {
  return {DiscreteJoint(2, 2, {0.25, 0.25, 0.25, 0.25}), {{0, 1}, {2, 3}}, {0, 0, 0, 0}, {{0, 1}}};
}

}  // namespace icarec::info
