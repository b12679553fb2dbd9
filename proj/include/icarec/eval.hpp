#pragma once

// Periodicity-based extraction metrics: PCA of a multichannel segment,
// normalized one-sided auto-correlation of its top component, and the
// presence ratio R = mean A(tau_f) / mean A(tau_m) over segments.

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/dataset_io.hpp"
#include "icarec/infometrics.hpp"
#include "icarec/io.hpp"
#include "icarec/linalg.hpp"
#include "icarec/parallel.hpp"
#include "icarec/tensor.hpp"

namespace icarec::eval {

inline constexpr double kPresenceFloor = 1e-6;
inline constexpr double kRankTolerance = 1e-12;

struct Pca {
  std::size_t k = 0, d = 0, n = 0;
  std::vector<double> mean;                // d
  std::vector<double> components;          // k x d, orthonormal rows
  std::vector<double> projections;         // n x k
  std::vector<double> explained_variance;  // k, sample variance per component
  std::vector<double> explained_ratio;     // k, fraction of total variance

  double component(std::size_t c, std::size_t j) const { return components[c * d + j]; }
  double projection(std::size_t i, std::size_t c) const { return projections[i * k + c]; }
};

/// PCA of n x d samples (row-major). Each component's largest-magnitude
/// entry is made positive.
inline Pca pca(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k) {
  if (x.size() != n * d) throw ShapeError("pca: data size does not match n x d");
  if (n < 2) throw ConfigError("pca: need at least 2 samples");
  if (k < 1 || k > d) throw ConfigError("pca: k must lie in [1, d]");
  Pca out;
  out.k = k;
  out.d = d;
  out.n = n;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += x[i * d + j];
  for (double& m : out.mean) m /= static_cast<double>(n);
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double ca = x[i * d + a] - out.mean[a];
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += ca * (x[i * d + b] - out.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) cov[b * d + a] = cov[a * d + b] = cov[a * d + b] / static_cast<double>(n - 1);
  const auto eig = linalg::jacobi_eigen(cov, d);
  double total = 0.0;
  for (double v : eig.values) total += std::max(0.0, v);
  const double top = std::max(0.0, eig.values[0]);
  std::size_t rank = 0;
  for (double v : eig.values)
    if (v > kRankTolerance * std::max(top, 1e-300) && v > 0.0) ++rank;
  if (k > rank) {
    throw ConfigError("pca: requested " + std::to_string(k) + " components but the data has rank " + std::to_string(rank));
  }
  out.components.resize(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(eig.vec(j, c)) > std::abs(eig.vec(arg, c))) arg = j;
    const double sign = eig.vec(arg, c) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) out.components[c * d + j] = sign * eig.vec(j, c);
    out.explained_variance.push_back(eig.values[c]);
    out.explained_ratio.push_back(total > 0 ? eig.values[c] / total : 0.0);
  }
  out.projections.assign(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (x[i * d + j] - out.mean[j]) * out.components[c * d + j];
      out.projections[i * k + c] = s;
    }
  return out;
}

/// Samples of a (channels, length) segment as a length x channels matrix.
inline std::vector<double> segment_samples(const Tensor& seg) {
  const std::size_t ch = seg.rank() == 1 ? 1 : seg.dim(0);
  const std::size_t len = seg.numel() / ch;
  std::vector<double> x(len * ch);
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t t = 0; t < len; ++t) x[t * ch + c] = seg[c * len + t];
  return x;
}

/// Top principal component time series of a (channels, length) segment.
inline std::vector<double> principal_signal(const Tensor& seg) {
  const std::size_t ch = seg.rank() == 1 ? 1 : seg.dim(0);
  const std::size_t len = seg.numel() / ch;
  const Pca p = pca(segment_samples(seg), len, ch, 1);
  return p.projections;
}

/// A(tau) = sum_t (x_t - mu)(x_{t+tau} - mu) / sum_t (x_t - mu)^2 for
/// tau = 0..max_lag.
inline std::vector<double> one_sided_autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
  if (x.size() < 2 * max_lag || x.size() < 2) {
    throw ConfigError("one_sided_autocorrelation: signal of length " + std::to_string(x.size()) +
                      " too short for lag " + std::to_string(max_lag));
  }
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> c(x.size());
  double energy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    c[t] = x[t] - mu;
    energy += c[t] * c[t];
  }
  if (!(energy > 0.0)) throw DegenerateBatchError("one_sided_autocorrelation: constant signal");
  std::vector<double> a(max_lag + 1);
  for (std::size_t tau = 0; tau <= max_lag; ++tau) {
    double s = 0.0;
    for (std::size_t t = 0; t + tau < x.size(); ++t) s += c[t] * c[t + tau];
    a[tau] = s / energy;
  }
  return a;
}

struct SegmentPresence {
  std::size_t tau_f = 0, tau_m = 0;
  double a_f = 0, a_m = 0;
};

struct PresenceReport {
  double a_f = 0, a_m = 0;
  std::optional<double> r;
  std::string absent_reason;
  std::vector<SegmentPresence> segments;

  nlohmann::json to_json() const {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : segments) segs.push_back({{"tau_f", s.tau_f}, {"tau_m", s.tau_m}, {"A_f", s.a_f}, {"A_m", s.a_m}});
    nlohmann::json j = {{"A_f", a_f}, {"A_m", a_m}, {"n_segments", segments.size()}, {"segments", segs},
                        {"lag_rounding", "nearest integer sample"}};
    j["R"] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
    if (!absent_reason.empty()) j["R_absent_reason"] = absent_reason;
    return j;
  }

  static PresenceReport from_json(const nlohmann::json& j) {
    PresenceReport p;
    p.a_f = j.at("A_f").get<double>();
    p.a_m = j.at("A_m").get<double>();
    if (!j.at("R").is_null()) p.r = j.at("R").get<double>();
    p.absent_reason = j.value("R_absent_reason", "");
    for (const auto& s : j.at("segments")) {
      p.segments.push_back({s.at("tau_f").get<std::size_t>(), s.at("tau_m").get<std::size_t>(), s.at("A_f").get<double>(),
                            s.at("A_m").get<double>()});
    }
    return p;
  }
};

/// Presence ratio over segments; each segment is (channels, length) or
/// (length), with its own fetal and maternal lags.
inline PresenceReport presence_ratio(const std::vector<Tensor>& segments, const std::vector<std::size_t>& tau_f,
                                     const std::vector<std::size_t>& tau_m) {
  if (segments.empty()) throw ConfigError("presence_ratio: no segments");
  if (tau_f.size() != segments.size() || tau_m.size() != segments.size()) {
    throw ConfigError("presence_ratio: need one lag pair per segment");
  }
  PresenceReport rep;
  rep.segments.resize(segments.size());
  parallel_for(segments.size(), [&](std::size_t i) {
    const std::size_t lag = std::max(tau_f[i], tau_m[i]);
    if (tau_f[i] == 0 || tau_m[i] == 0) throw ConfigError("presence_ratio: lags must be positive");
    const auto a = one_sided_autocorrelation(principal_signal(segments[i]), lag);
    rep.segments[i] = {tau_f[i], tau_m[i], a[tau_f[i]], a[tau_m[i]]};
  });
  for (const auto& s : rep.segments) {
    rep.a_f += s.a_f;
    rep.a_m += s.a_m;
  }
  rep.a_f /= static_cast<double>(segments.size());
  rep.a_m /= static_cast<double>(segments.size());
  if (rep.a_m < kPresenceFloor) {
    rep.absent_reason = "mean maternal-lag auto-correlation " + std::to_string(rep.a_m) + " below floor 1e-6";
  } else {
    rep.r = rep.a_f / rep.a_m;
  }
  return rep;
}

inline PresenceReport presence_ratio(const std::vector<Tensor>& segments, std::size_t tau_f, std::size_t tau_m) {
  return presence_ratio(segments, std::vector<std::size_t>(segments.size(), tau_f),
                        std::vector<std::size_t>(segments.size(), tau_m));
}

/// Splits an (n, channels, length) batch into per-segment tensors.
inline std::vector<Tensor> split_segments(const Tensor& batch) {
  std::vector<Tensor> out;
  const std::size_t n = batch.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor one = data::gather(batch, {i});
    Shape s(batch.shape().begin() + 1, batch.shape().end());
    out.push_back(one.reshaped(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA coloring export: pc1..pc3, color_f = i mod tau_f, color_m = i mod tau_m.

struct ColoringTable {
  std::vector<std::array<double, 3>> pcs;
  std::vector<std::size_t> color_f, color_m;
};

inline ColoringTable pca_coloring(const std::vector<double>& samples, std::size_t n, std::size_t d, std::size_t tau_f,
                                  std::size_t tau_m) {
  if (tau_f == 0 || tau_m == 0) throw ConfigError("pca_coloring: periods must be positive");
  const std::size_t k = std::min<std::size_t>(3, d);
  const Pca p = pca(samples, n, d, k);
  ColoringTable t;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> row{0, 0, 0};
    for (std::size_t c = 0; c < k; ++c) row[c] = p.projection(i, c);
    t.pcs.push_back(row);
    t.color_f.push_back(i % tau_f);
    t.color_m.push_back(i % tau_m);
  }
  return t;
}

inline std::string coloring_to_csv(const ColoringTable& t) {
  std::ostringstream os;
  os << "pc1,pc2,pc3,color_f,color_m\n";
  for (std::size_t i = 0; i < t.pcs.size(); ++i) {
    os << data::format_double(t.pcs[i][0]) << ',' << data::format_double(t.pcs[i][1]) << ','
       << data::format_double(t.pcs[i][2]) << ',' << t.color_f[i] << ',' << t.color_m[i] << '\n';
  }
  return os.str();
}

inline ColoringTable coloring_from_csv(const std::string& text, const std::string& what) {
  const auto tab = data::detail::parse_table(text, what);
  const std::vector<std::string> expect{"pc1", "pc2", "pc3", "color_f", "color_m"};
  if (tab.header != expect) throw ParseError(what + ": expected header pc1,pc2,pc3,color_f,color_m", 0);
  ColoringTable t;
  for (const auto& r : tab.rows) {
    t.pcs.push_back({r[0], r[1], r[2]});
    t.color_f.push_back(static_cast<std::size_t>(r[3]));
    t.color_m.push_back(static_cast<std::size_t>(r[4]));
  }
  return t;
}

inline ColoringTable pca_coloring_export(const std::vector<double>& samples, std::size_t n, std::size_t d,
                                         std::size_t tau_f, std::size_t tau_m, const std::filesystem::path& path) {
  ColoringTable t = pca_coloring(samples, n, d, tau_f, tau_m);
  io::write_file_atomic(path, coloring_to_csv(t));
  return t;
}

// ---------------------------------------------------------------------------
// Consolidated report.

struct EvalInputs {
  /// Periodic-signal segments for the presence ratio.
  std::vector<Tensor> input_segments, code_segments;
  std::vector<std::size_t> tau_f, tau_m;
  /// Per-sample codes (n, k), conditions (n, m) and ground truth (n, 1).
  std::optional<Tensor> codes, conditions, source;
  std::size_t hsic_max_samples = 512;
  std::size_t hsic_permutations = 200;
  std::size_t mi_bins = 16;
  std::uint64_t seed = 0;
};

struct MetricsReport {
  std::optional<PresenceReport> presence_x, presence_code;
  std::optional<double> hsic_code_condition, hsic_threshold_95;
  std::optional<double> spearman_code_source;
  std::optional<double> mi_code_source;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (presence_x) {
      j["presence_x"] = presence_x->to_json();
      j["R_x"] = presence_x->r ? nlohmann::json(*presence_x->r) : nlohmann::json(nullptr);
    }
    if (presence_code) {
      j["presence_code"] = presence_code->to_json();
      j["R_code"] = presence_code->r ? nlohmann::json(*presence_code->r) : nlohmann::json(nullptr);
    }
    if (hsic_code_condition) j["hsic_code_condition"] = *hsic_code_condition;
    if (hsic_threshold_95) j["hsic_threshold_95"] = *hsic_threshold_95;
    if (spearman_code_source) j["spearman_code_source"] = *spearman_code_source;
    if (mi_code_source) j["mi_code_source_bits"] = *mi_code_source;
    return j;
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    if (j.contains("presence_x")) r.presence_x = PresenceReport::from_json(j.at("presence_x"));
    if (j.contains("presence_code")) r.presence_code = PresenceReport::from_json(j.at("presence_code"));
    if (j.contains("hsic_code_condition")) r.hsic_code_condition = j.at("hsic_code_condition").get<double>();
    if (j.contains("hsic_threshold_95")) r.hsic_threshold_95 = j.at("hsic_threshold_95").get<double>();
    if (j.contains("spearman_code_source")) r.spearman_code_source = j.at("spearman_code_source").get<double>();
    if (j.contains("mi_code_source_bits")) r.mi_code_source = j.at("mi_code_source_bits").get<double>();
    return r;
  }
};

namespace detail {

inline Tensor strided_rows(const Tensor& t, std::size_t max_rows) {
  const std::size_t n = t.dim(0);
  if (n <= max_rows) return t;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < max_rows; ++i) idx.push_back(i * n / max_rows);
  return data::gather(t, idx);
}

inline std::vector<double> first_column(const Tensor& t) {
  const std::size_t w = t.numel() / t.dim(0);
  std::vector<double> v(t.dim(0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t[i * w];
  return v;
}

}  // namespace detail

/// Fields are filled only when their inputs are present.
inline MetricsReport evaluation_report(const EvalInputs& in) {
  MetricsReport r;
  if (!in.input_segments.empty()) r.presence_x = presence_ratio(in.input_segments, in.tau_f, in.tau_m);
  if (!in.code_segments.empty()) r.presence_code = presence_ratio(in.code_segments, in.tau_f, in.tau_m);
  if (in.codes && in.conditions) {
    if (in.codes->dim(0) != in.conditions->dim(0)) throw ShapeError("evaluation_report: codes and conditions misaligned");
    const Tensor a = detail::strided_rows(*in.codes, in.hsic_max_samples);
    const Tensor b = detail::strided_rows(*in.conditions, in.hsic_max_samples);
    r.hsic_code_condition = info::hsic(a, b);
    r.hsic_threshold_95 = info::hsic_permutation_threshold(a, b, in.hsic_permutations, 0.95, in.seed);
  }
  if (in.codes && in.source) {
    if (in.codes->dim(0) != in.source->dim(0)) throw ShapeError("evaluation_report: codes and source misaligned");
    const std::size_t width = in.codes->numel() / in.codes->dim(0);
    if (width == 1 && in.source->numel() == in.source->dim(0)) {
      const auto c = detail::first_column(*in.codes), s = detail::first_column(*in.source);
      r.spearman_code_source = info::spearman(c, s);
      const std::size_t bins = in.mi_bins;
      if (c.size() >= 4 * bins * bins) r.mi_code_source = info::mi_histogram(c, s, bins);
    }
  }
  return r;
}

}  // namespace icarec::eval
