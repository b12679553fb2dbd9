#pragma once

// Reference-channel adaptive interference cancellation (LMS and RLS).
// The regressor at sample k stacks, for every reference channel, the taps
// most recent reference samples r[k], r[k-1], ..., zero before the start.

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/error.hpp"
#include "icarec/parallel.hpp"
#include "icarec/tensor.hpp"

namespace icarec::baselines {

inline constexpr double kDivergenceBound = 1e6;

struct AdaptiveFilterConfig {
  std::size_t taps = 8;
  double mu = 0.01;
  double lambda = 0.999;
  double delta = 0.01;

  nlohmann::json to_json() const { return {{"taps", taps}, {"mu", mu}, {"lambda", lambda}, {"delta", delta}}; }
};

enum class Method { lms, rls };

inline std::string to_string(Method m) { return m == Method::lms ? "lms" : "rls"; }

inline Method method_from_string(const std::string& s) {
  if (s == "lms") return Method::lms;
  if (s == "rls") return Method::rls;
  throw ConfigError("unknown baseline method '" + s + "' (expected lms or rls)");
}

struct CancelResult {
  std::vector<double> residual;
  std::vector<double> weights;
};

/// Reference channels stored channel-major: reference[c][k].
using Channels = std::vector<std::vector<double>>;

namespace detail {

inline void check_inputs(const std::vector<double>& primary, const Channels& reference, const AdaptiveFilterConfig& cfg,
                         Method m) {
  if (cfg.taps < 1) throw ConfigError("adaptive filter: taps must be at least 1");
  if (m == Method::lms && !(cfg.mu >= 0.0)) throw ConfigError("lms: mu must be nonnegative");
  if (m == Method::rls && !(cfg.lambda > 0.0 && cfg.lambda <= 1.0)) throw ConfigError("rls: lambda must lie in (0, 1]");
  if (m == Method::rls && !(cfg.delta > 0.0)) throw ConfigError("rls: delta must be positive");
  if (reference.empty()) throw ConfigError("adaptive filter: no reference channels");
  bool nonzero = false;
  for (const auto& r : reference) {
    if (r.size() != primary.size()) throw ShapeError("adaptive filter: primary and reference lengths differ");
    for (double v : r) nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw ConfigError("adaptive filter: reference is all zero");
}

inline void regressor(const Channels& reference, std::size_t taps, std::size_t k, std::vector<double>& u) {
  for (std::size_t c = 0; c < reference.size(); ++c)
    for (std::size_t j = 0; j < taps; ++j) u[c * taps + j] = k >= j ? reference[c][k - j] : 0.0;
}

}  // namespace detail

/// e_k = p_k - w.u_k;  w <- w + mu e_k u_k.
inline CancelResult lms_cancel(const std::vector<double>& primary, const Channels& reference,
                               const AdaptiveFilterConfig& cfg = {}) {
  detail::check_inputs(primary, reference, cfg, Method::lms);
  const std::size_t m = cfg.taps * reference.size();
  CancelResult out{std::vector<double>(primary.size()), std::vector<double>(m, 0.0)};
  std::vector<double> u(m);
  for (std::size_t k = 0; k < primary.size(); ++k) {
    detail::regressor(reference, cfg.taps, k, u);
    double est = 0.0;
    for (std::size_t i = 0; i < m; ++i) est += out.weights[i] * u[i];
    const double e = primary[k] - est;
    out.residual[k] = e;
    for (std::size_t i = 0; i < m; ++i) {
      out.weights[i] += cfg.mu * e * u[i];
      if (!(std::abs(out.weights[i]) <= kDivergenceBound)) {
        throw NonFiniteError("lms diverged at sample " + std::to_string(k) + " (|w| > 1e6); use a smaller mu");
      }
    }
  }
  return out;
}

/// Exponentially weighted RLS with P_0 = I / delta; the residual is the a
/// priori error.
inline CancelResult rls_cancel(const std::vector<double>& primary, const Channels& reference,
                               const AdaptiveFilterConfig& cfg = {}) {
  detail::check_inputs(primary, reference, cfg, Method::rls);
  const std::size_t m = cfg.taps * reference.size();
  CancelResult out{std::vector<double>(primary.size()), std::vector<double>(m, 0.0)};
  std::vector<double> p(m * m, 0.0), u(m), pu(m), gain(m);
  for (std::size_t i = 0; i < m; ++i) p[i * m + i] = 1.0 / cfg.delta;
  for (std::size_t k = 0; k < primary.size(); ++k) {
    detail::regressor(reference, cfg.taps, k, u);
    double denom = cfg.lambda;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += p[i * m + j] * u[j];
      pu[i] = s;
      denom += u[i] * s;
    }
    for (std::size_t i = 0; i < m; ++i) gain[i] = pu[i] / denom;
    double est = 0.0;
    for (std::size_t i = 0; i < m; ++i) est += out.weights[i] * u[i];
    const double e = primary[k] - est;
    out.residual[k] = e;
    for (std::size_t i = 0; i < m; ++i) out.weights[i] += gain[i] * e;
    // P <- (P - g (P u)^T) / lambda, kept symmetric.
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        const double v = (p[i * m + j] - 0.5 * (gain[i] * pu[j] + gain[j] * pu[i])) / cfg.lambda;
        p[i * m + j] = p[j * m + i] = v;
      }
    if (!std::isfinite(e) || !std::isfinite(denom)) {
      throw NonFiniteError("rls recursion became non-finite at sample " + std::to_string(k));
    }
  }
  for (double w : out.weights)
    if (!std::isfinite(w)) throw NonFiniteError("rls recursion produced non-finite weights");
  return out;
}

inline CancelResult cancel(Method m, const std::vector<double>& primary, const Channels& reference,
                           const AdaptiveFilterConfig& cfg) {
  return m == Method::lms ? lms_cancel(primary, reference, cfg) : rls_cancel(primary, reference, cfg);
}

inline Channels rows_of(const Tensor& t) {
  const std::size_t ch = t.dim(0), len = t.numel() / ch;
  Channels out(ch, std::vector<double>(len));
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t k = 0; k < len; ++k) out[c][k] = t[c * len + k];
  return out;
}

/// Cancels the full thorax reference from each abdominal channel
/// independently. x is (n_a, L), t is (n_t, L); result is (n_a, L).
inline Tensor cancel_multichannel(const Tensor& x, const Tensor& t, Method m, const AdaptiveFilterConfig& cfg = {}) {
  if (x.rank() != 2 || t.rank() != 2 || x.dim(1) != t.dim(1)) {
    throw ShapeError("cancel_multichannel: expected (n_a, L) and (n_t, L), got " + shape_str(x.shape()) + " and " +
                     shape_str(t.shape()));
  }
  const Channels prim = rows_of(x), ref = rows_of(t);
  const std::size_t len = x.dim(1);
  std::vector<double> out(x.numel());
  parallel_for(prim.size(), [&](std::size_t c) {
    const auto r = cancel(m, prim[c], ref, cfg);
    std::copy(r.residual.begin(), r.residual.end(), out.begin() + static_cast<std::ptrdiff_t>(c * len));
  });
  return Tensor(x.shape(), std::move(out));
}

}  // namespace icarec::baselines
