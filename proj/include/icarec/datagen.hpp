#pragma once

// Seeded synthetic generators of paired data (x = f(s, t), t): 2D uniform
// sources under linear or softplus mixing, a rotating-angles toy, and a
// synthetic abdominal/thorax ECG record. The hidden source s is kept apart
// from the (x, t) pairs a trainer consumes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/error.hpp"
#include "icarec/rng.hpp"
#include "icarec/tensor.hpp"

namespace icarec::data {

/// What a trainer sees: inputs and conditions, never the hidden source.
struct Pairs {
  Tensor x;
  std::optional<Tensor> t;
  std::vector<std::size_t> t_class;
  std::size_t num_classes = 0;

  std::size_t size() const { return x.dim(0); }
  bool symbolic() const { return num_classes > 0; }
};

/// Continuous multichannel recording from which segments are cut.
struct FecgRecord {
  Tensor abdominal;  // (n_a, L)
  Tensor thorax;     // (n_t, L)
  Tensor fetal;      // (L)
  Tensor maternal;   // (L)
  std::size_t tau_m = 0;
  std::size_t tau_f = 0;

  std::size_t length() const { return abdominal.dim(1); }
};

struct PairedDataset {
  Pairs pairs;
  std::optional<Tensor> s;
  std::optional<FecgRecord> record;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return pairs.size(); }
};

/// Rows `idx` of a tensor whose leading axis indexes samples.
inline Tensor gather(const Tensor& t, const std::vector<std::size_t>& idx) {
  const std::size_t row = t.numel() / t.dim(0);
  std::vector<double> out(idx.size() * row);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= t.dim(0)) throw ShapeError("gather: index out of range");
    std::copy_n(t.data().data() + idx[i] * row, row, out.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  Shape s = t.shape();
  s[0] = idx.size();
  return Tensor(std::move(s), std::move(out));
}

inline Pairs gather(const Pairs& p, const std::vector<std::size_t>& idx) {
  Pairs out;
  out.x = gather(p.x, idx);
  if (p.t) out.t = gather(*p.t, idx);
  out.num_classes = p.num_classes;
  for (std::size_t i : idx) {
    if (!p.t_class.empty()) out.t_class.push_back(p.t_class[i]);
  }
  return out;
}

inline PairedDataset gather(const PairedDataset& d, const std::vector<std::size_t>& idx) {
  PairedDataset out;
  out.pairs = gather(d.pairs, idx);
  if (d.s) out.s = gather(*d.s, idx);
  out.meta = d.meta;
  return out;
}

// ---------------------------------------------------------------------------
// Mixing specs.

enum class MixingKind { linear, softplus_nonlinear, angles, fecg };

inline std::string to_string(MixingKind k) {
  switch (k) {
    case MixingKind::linear: return "linear";
    case MixingKind::softplus_nonlinear: return "softplus-nonlinear";
    case MixingKind::angles: return "angles";
    case MixingKind::fecg: return "fecg";
  }
  return "linear";
}

inline MixingKind mixing_from_string(const std::string& s) {
  for (MixingKind k : {MixingKind::linear, MixingKind::softplus_nonlinear, MixingKind::angles, MixingKind::fecg}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown mixing kind '" + s + "'");
}

using Matrix2 = std::array<std::array<double, 2>, 2>;

inline constexpr Matrix2 kDefaultMixing{{{1.0, 1.0}, {1.0, -1.0}}};
inline constexpr double kSingularDet = 1e-6;

struct AnglesSpec {
  std::size_t embed_dim = 8;
  bool identity = false;
  std::uint64_t embedding_seed = 0;
};

struct MixingSpec {
  MixingKind kind = MixingKind::linear;
  Matrix2 a = kDefaultMixing;
  AnglesSpec angles;
};

inline double det(const Matrix2& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

inline void check_invertible(const Matrix2& a) {
  if (!(std::abs(det(a)) > kSingularDet)) {
    throw ConfigError("mixing matrix is singular or nearly so (|det| = " + std::to_string(std::abs(det(a))) + ")");
  }
}

// ---------------------------------------------------------------------------
// 2D sources.

struct Sources2D {
  std::vector<double> s;
  std::vector<double> t;
};

/// i.i.d. uniform(0,1) pairs; all s are drawn before all t.
inline Sources2D gen_uniform_sources(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_uniform_sources: n must be positive");
  Rng rng(seed);
  Sources2D out;
  out.s.resize(n);
  out.t.resize(n);
  for (double& v : out.s) v = rng.uniform();
  for (double& v : out.t) v = rng.uniform();
  return out;
}

inline std::array<double, 2> mix_point(const Matrix2& a, double s, double t) {
  return {a[0][0] * s + a[0][1] * t, a[1][0] * s + a[1][1] * t};
}

inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

/// x_i = A [s_i, t_i]; result is (n, 2).
inline Tensor mix_linear(const std::vector<double>& s, const std::vector<double>& t, const Matrix2& a) {
  check_invertible(a);
  if (s.size() != t.size()) throw ShapeError("mix_linear: s and t lengths differ");
  std::vector<double> x(2 * s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = mix_point(a, s[i], t[i]);
    x[2 * i] = p[0];
    x[2 * i + 1] = p[1];
  }
  return Tensor({s.size(), 2}, std::move(x));
}

/// x_i = softplus(A [s_i, t_i]).
inline Tensor mix_nonlinear(const std::vector<double>& s, const std::vector<double>& t, const Matrix2& a) {
  return map(mix_linear(s, t, a), softplus);
}

inline PairedDataset make_2d_dataset(std::size_t n, std::uint64_t seed, const MixingSpec& spec) {
  if (spec.kind != MixingKind::linear && spec.kind != MixingKind::softplus_nonlinear) {
    throw ConfigError("make_2d_dataset: mixing must be linear or softplus-nonlinear");
  }
  const Sources2D src = gen_uniform_sources(n, seed);
  PairedDataset d;
  d.pairs.x = spec.kind == MixingKind::linear ? mix_linear(src.s, src.t, spec.a) : mix_nonlinear(src.s, src.t, spec.a);
  d.pairs.t = Tensor({n, 1}, src.t);
  d.s = Tensor({n, 1}, src.s);
  d.meta = {{"generator", spec.kind == MixingKind::linear ? "2d-linear" : "2d-nonlinear"},
            {"params", {{"n", n}, {"mixing", to_string(spec.kind)}, {"A", spec.a}, {"source_range", {0.0, 1.0}}}},
            {"seed", seed}};
  return d;
}

// ---------------------------------------------------------------------------
// Rotating-angles toy.

/// d x 4 matrix with orthonormal columns (Gram-Schmidt on Gaussian draws).
inline std::vector<double> random_orthonormal_columns(std::size_t d, Rng& rng) {
  std::vector<double> q(d * 4);
  for (double& v : q) v = rng.normal();
  for (std::size_t c = 0; c < 4; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0.0;
        for (std::size_t r = 0; r < d; ++r) dot += q[r * 4 + c] * q[r * 4 + p];
        for (std::size_t r = 0; r < d; ++r) q[r * 4 + c] -= dot * q[r * 4 + p];
      }
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q[r * 4 + c] * q[r * 4 + c];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < d; ++r) q[r * 4 + c] /= norm;
  }
  return q;
}

/// The fixed smooth injective embedding R^4 -> R^d:
///   x = Q u + 0.25 tanh(Q' u), with Q, Q' orthonormal-column matrices.
/// The identity variant pads u with zeros.
struct AnglesEmbedding {
  AnglesSpec spec;
  std::vector<double> q, q2;

  explicit AnglesEmbedding(const AnglesSpec& s) : spec(s) {
    if (s.embed_dim < 4) throw ConfigError("angles toy: embed_dim must be at least 4");
    if (!s.identity) {
      Rng rng(s.embedding_seed);
      q = random_orthonormal_columns(s.embed_dim, rng);
      q2 = random_orthonormal_columns(s.embed_dim, rng);
    }
  }

  std::vector<double> operator()(const std::array<double, 4>& u) const {
    const std::size_t d = spec.embed_dim;
    std::vector<double> x(d, 0.0);
    if (spec.identity) {
      std::copy(u.begin(), u.end(), x.begin());
      return x;
    }
    for (std::size_t r = 0; r < d; ++r) {
      double lin = 0.0, inner = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        lin += q[r * 4 + c] * u[c];
        inner += q2[r * 4 + c] * u[c];
      }
      x[r] = lin + 0.25 * std::tanh(inner);
    }
    return x;
  }

  std::vector<double> at_angles(double theta_s, double theta_t) const {
    return (*this)({std::cos(theta_s), std::sin(theta_s), std::cos(theta_t), std::sin(theta_t)});
  }
};

/// theta_s, theta_t i.i.d. uniform on [0, 2 pi); t = (cos theta_t, sin theta_t);
/// s = theta_s.
inline PairedDataset gen_rotating_angles_toy(std::size_t n, std::uint64_t seed, const AnglesSpec& spec) {
  const AnglesEmbedding embed(spec);
  Rng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> ts(n), tt(n);
  for (double& v : ts) v = two_pi * rng.uniform();
  for (double& v : tt) v = two_pi * rng.uniform();
  std::vector<double> x, t(2 * n);
  x.reserve(n * spec.embed_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = embed.at_angles(ts[i], tt[i]);
    x.insert(x.end(), xi.begin(), xi.end());
    t[2 * i] = std::cos(tt[i]);
    t[2 * i + 1] = std::sin(tt[i]);
  }
  PairedDataset d;
  d.pairs.x = Tensor({n, spec.embed_dim}, std::move(x));
  d.pairs.t = Tensor({n, 2}, std::move(t));
  d.s = Tensor({n, 1}, std::move(ts));
  d.meta = {{"generator", "angles-toy"},
            {"params",
             {{"n", n}, {"embed_dim", spec.embed_dim}, {"identity", spec.identity}, {"embedding_seed", spec.embedding_seed}}},
            {"seed", seed}};
  return d;
}

// ---------------------------------------------------------------------------
// Synthetic fetal/maternal ECG.

struct FecgConfig {
  std::size_t n_a = 24;
  std::size_t n_t = 3;
  std::size_t n_T = 2000;
  std::size_t tau_m = 430;
  std::size_t tau_f = 270;
  double alpha = 0.2;
  double sigma = 0.01;
  /// Total record length; evaluation cuts it into n_T-long segments.
  std::size_t record_length = 60000;
  /// Training segments cut at seeded offsets.
  std::size_t train_segments = 128;
  std::size_t train_length = 500;
};

/// One beat: P, Q, R, S, T Gaussian waves as (centre, amplitude, width),
/// with centre and width in fractions of the beat period.
struct Wave {
  double centre, amplitude, width;
};
inline constexpr std::array<Wave, 5> kBeat{{{-0.2, 0.2, 0.035},
                                            {-0.04, -0.15, 0.012},
                                            {0.0, 1.0, 0.012},
                                            {0.04, -0.25, 0.012},
                                            {0.36, 0.4, 0.045}}};

/// Periodic beat train with R peaks at phase + k * period.
inline std::vector<double> beat_train(std::size_t length, std::size_t period, double phase) {
  std::vector<double> sig(length, 0.0);
  const double p = static_cast<double>(period);
  const double end = static_cast<double>(length) + 2.0 * p;
  for (double k = phase - 2.0 * p; k < end; k += p) {
    for (const Wave& w : kBeat) {
      const double centre = k + w.centre * p;
      const double width = w.width * p;
      const auto lo = static_cast<long>(std::max(0.0, std::floor(centre - 8.0 * width)));
      const auto hi = static_cast<long>(std::min(static_cast<double>(length) - 1.0, std::ceil(centre + 8.0 * width)));
      for (long t = lo; t <= hi; ++t) {
        const double z = (static_cast<double>(t) - centre) / width;
        sig[static_cast<std::size_t>(t)] += w.amplitude * std::exp(-0.5 * z * z);
      }
    }
  }
  return sig;
}

inline void validate(const FecgConfig& c) {
  if (c.n_a == 0 || c.n_t == 0) throw ConfigError("fecg: channel counts must be positive");
  if (c.tau_m == 0 || c.tau_f == 0) throw ConfigError("fecg: periods must be positive");
  if (c.n_T < 2) throw ConfigError("fecg: segment length must be at least 2");
  if (std::lcm(c.tau_m, c.tau_f) <= c.n_T) {
    throw ConfigError("fecg: periods " + std::to_string(c.tau_m) + " and " + std::to_string(c.tau_f) +
                      " are commensurate within a segment (lcm " + std::to_string(std::lcm(c.tau_m, c.tau_f)) +
                      " <= n_T " + std::to_string(c.n_T) + ")");
  }
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) throw ConfigError("fecg: alpha must lie in [0, 1)");
  if (!(c.sigma >= 0.0)) throw ConfigError("fecg: sigma must be nonnegative");
  if (c.record_length < c.n_T) throw ConfigError("fecg: record shorter than one segment");
  if (c.train_length > c.record_length || c.train_length == 0) throw ConfigError("fecg: invalid training segment length");
}

/// thorax = g_t m + noise; abdominal = g_m m + alpha g_f g + noise.
inline FecgRecord gen_fecg_record(const FecgConfig& c, std::uint64_t seed) {
  validate(c);
  Rng rng(seed);
  const std::size_t len = c.record_length;
  const double phase_m = rng.uniform() * static_cast<double>(c.tau_m);
  const double phase_f = rng.uniform() * static_cast<double>(c.tau_f);
  std::vector<double> gm(c.n_a), gf(c.n_a), gt(c.n_t);
  for (double& v : gm) v = rng.normal();
  for (double& v : gf) v = rng.normal();
  for (double& v : gt) v = rng.normal();
  const std::vector<double> m = beat_train(len, c.tau_m, phase_m);
  const std::vector<double> g = beat_train(len, c.tau_f, phase_f);
  std::vector<double> x(c.n_a * len), th(c.n_t * len);
  for (std::size_t ch = 0; ch < c.n_a; ++ch)
    for (std::size_t t = 0; t < len; ++t) x[ch * len + t] = gm[ch] * m[t] + c.alpha * gf[ch] * g[t] + c.sigma * rng.normal();
  for (std::size_t ch = 0; ch < c.n_t; ++ch)
    for (std::size_t t = 0; t < len; ++t) th[ch * len + t] = gt[ch] * m[t] + c.sigma * rng.normal();
  FecgRecord r;
  r.abdominal = Tensor({c.n_a, len}, std::move(x));
  r.thorax = Tensor({c.n_t, len}, std::move(th));
  r.fetal = Tensor::vector(g);
  r.maternal = Tensor::vector(m);
  r.tau_m = c.tau_m;
  r.tau_f = c.tau_f;
  return r;
}

/// Cuts (n, channels, length) segments of a (channels, L) signal.
inline Tensor cut_segments(const Tensor& signal, const std::vector<std::size_t>& offsets, std::size_t length) {
  const bool flat = signal.rank() == 1;
  const std::size_t ch = flat ? 1 : signal.dim(0);
  const std::size_t total = flat ? signal.dim(0) : signal.dim(1);
  std::vector<double> out(offsets.size() * ch * length);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (offsets[i] + length > total) throw ShapeError("cut_segments: segment exceeds the record");
    for (std::size_t c = 0; c < ch; ++c) {
      std::copy_n(signal.data().data() + c * total + offsets[i], length,
                  out.begin() + static_cast<std::ptrdiff_t>((i * ch + c) * length));
    }
  }
  return Tensor({offsets.size(), ch, length}, std::move(out));
}

/// Back-to-back offsets 0, n_T, 2 n_T, ... covering the record.
inline std::vector<std::size_t> contiguous_offsets(std::size_t total, std::size_t length) {
  std::vector<std::size_t> off;
  for (std::size_t o = 0; o + length <= total; o += length) off.push_back(o);
  return off;
}

inline PairedDataset segment_record(const FecgRecord& r, const std::vector<std::size_t>& offsets, std::size_t length) {
  PairedDataset d;
  d.pairs.x = cut_segments(r.abdominal, offsets, length);
  d.pairs.t = cut_segments(r.thorax, offsets, length);
  d.s = cut_segments(r.fetal, offsets, length);
  return d;
}

inline std::vector<std::size_t> seeded_offsets(std::size_t count, std::size_t total, std::size_t length,
                                               std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  std::vector<std::size_t> off(count);
  for (auto& o : off) o = rng.below(total - length + 1);
  return off;
}

inline nlohmann::json fecg_params_json(const FecgConfig& c) {
  return {{"n_a", c.n_a},
          {"n_t", c.n_t},
          {"n_T", c.n_T},
          {"tau_m", c.tau_m},
          {"tau_f", c.tau_f},
          {"alpha", c.alpha},
          {"sigma", c.sigma},
          {"record_length", c.record_length},
          {"train_segments", c.train_segments},
          {"train_length", c.train_length}};
}

/// Record plus training segments (train_length long, seeded offsets).
inline PairedDataset gen_synthetic_fecg(const FecgConfig& c, std::uint64_t seed) {
  FecgRecord r = gen_fecg_record(c, seed);
  const auto offsets = seeded_offsets(c.train_segments, c.record_length, c.train_length, seed);
  PairedDataset d = segment_record(r, offsets, c.train_length);
  d.record = std::move(r);
  d.meta = {{"generator", "fecg"},
            {"params", fecg_params_json(c)},
            {"seed", seed},
            {"segment_offsets", offsets},
            {"segment_length", c.train_length}};
  return d;
}

// ---------------------------------------------------------------------------
// Invertibility probe.

/// Minimum over seeded probe points of the central-difference Jacobian
/// determinant magnitude (Gram determinant sqrt(det(J^T J)) for the
/// angles embedding, whose Jacobian is not square).
inline double verify_invertibility(const MixingSpec& spec, std::size_t n_probes, std::uint64_t seed, double h = 1e-6) {
  if (spec.kind == MixingKind::fecg) throw ConfigError("verify_invertibility: not applicable to fecg mixing");
  if (spec.kind != MixingKind::angles) check_invertible(spec.a);
  Rng rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  std::optional<AnglesEmbedding> embed;
  if (spec.kind == MixingKind::angles) embed.emplace(spec.angles);
  auto f = [&](double u, double v) -> std::vector<double> {
    if (embed) return embed->at_angles(u, v);
    const auto p = mix_point(spec.a, u, v);
    if (spec.kind == MixingKind::linear) return {p[0], p[1]};
    return {softplus(p[0]), softplus(p[1])};
  };
  for (std::size_t i = 0; i < n_probes; ++i) {
    double u = rng.uniform(), v = rng.uniform();
    if (embed) {
      u *= 2.0 * std::numbers::pi;
      v *= 2.0 * std::numbers::pi;
    }
    const auto fu1 = f(u + h, v), fu0 = f(u - h, v), fv1 = f(u, v + h), fv0 = f(u, v - h);
    double j00 = 0, j01 = 0, j11 = 0;  // Gram matrix J^T J
    for (std::size_t r = 0; r < fu1.size(); ++r) {
      const double du = (fu1[r] - fu0[r]) / (2 * h);
      const double dv = (fv1[r] - fv0[r]) / (2 * h);
      j00 += du * du;
      j01 += du * dv;
      j11 += dv * dv;
    }
    worst = std::min(worst, std::sqrt(std::max(0.0, j00 * j11 - j01 * j01)));
  }
  return worst;
}

}  // namespace icarec::data
