#pragma once

// Exact discrete entropies and mutual informations (bits), plus sample
// estimators: histogram MI, Gaussian-kernel HSIC with a permutation
// threshold, and Spearman rank correlation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "icarec/error.hpp"
#include "icarec/parallel.hpp"
#include "icarec/rng.hpp"
#include "icarec/tensor.hpp"

namespace icarec::info {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr std::size_t kMaxSupport = 64;

inline void validate_distribution(const std::vector<double>& p, const std::string& what = "distribution") {
  if (p.empty()) throw ConfigError(what + ": empty");
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      throw ConfigError(what + ": entry " + std::to_string(i) + " is negative or non-finite");
    }
    total += p[i];
  }
  if (std::abs(static_cast<double>(total) - 1.0) > kMassTolerance) {
    throw ConfigError(what + ": mass sums to " + std::to_string(static_cast<double>(total)) + ", not 1");
  }
}

namespace detail {

inline double plogp_sum(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

}  // namespace detail

/// -sum p log2 p with 0 log 0 = 0.
inline double entropy_discrete(const std::vector<double>& p) {
  validate_distribution(p);
  return detail::plogp_sum(p);
}

/// p(a, b) stored row-major, a indexing rows.
struct DiscreteJoint {
  std::size_t rows = 0, cols = 0;
  std::vector<double> p;

  DiscreteJoint() = default;
  DiscreteJoint(std::size_t r, std::size_t c, std::vector<double> probs) : rows(r), cols(c), p(std::move(probs)) {
    if (r == 0 || c == 0 || r > kMaxSupport || c > kMaxSupport) {
      throw ConfigError("joint support " + std::to_string(r) + "x" + std::to_string(c) + " outside 1..64");
    }
    if (p.size() != r * c) throw ShapeError("joint: table size does not match support");
    validate_distribution(p, "joint");
  }

  static DiscreteJoint from_rows(const std::vector<std::vector<double>>& t) {
    std::vector<double> flat;
    const std::size_t c = t.empty() ? 0 : t[0].size();
    for (const auto& row : t) {
      if (row.size() != c) throw ShapeError("joint: ragged table");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return DiscreteJoint(t.size(), c, std::move(flat));
  }

  double at(std::size_t a, std::size_t b) const { return p[a * cols + b]; }

  std::vector<double> marginal_rows() const {
    std::vector<double> m(rows, 0.0);
    for (std::size_t a = 0; a < rows; ++a)
      for (std::size_t b = 0; b < cols; ++b) m[a] += at(a, b);
    return m;
  }

  std::vector<double> marginal_cols() const {
    std::vector<double> m(cols, 0.0);
    for (std::size_t a = 0; a < rows; ++a)
      for (std::size_t b = 0; b < cols; ++b) m[b] += at(a, b);
    return m;
  }
};

inline double joint_entropy(const DiscreteJoint& j) { return detail::plogp_sum(j.p); }

/// sum p log2(p / (p_a p_b)).
inline double mutual_information_discrete(const DiscreteJoint& j) {
  const auto pa = j.marginal_rows(), pb = j.marginal_cols();
  double mi = 0.0;
  for (std::size_t a = 0; a < j.rows; ++a)
    for (std::size_t b = 0; b < j.cols; ++b) {
      const double v = j.at(a, b);
      if (v > 0.0) mi += v * std::log2(v / (pa[a] * pb[b]));
    }
  return std::max(0.0, mi);
}

enum class Given { rows, cols };

/// H(other | given) = H(A, B) - H(given).
inline double conditional_entropy(const DiscreteJoint& j, Given given) {
  const double hg = detail::plogp_sum(given == Given::rows ? j.marginal_rows() : j.marginal_cols());
  return std::max(0.0, joint_entropy(j) - hg);
}

/// Joint of two integer-valued functions of the same outcomes: each outcome
/// carries (a, b, probability).
struct Outcome {
  long a, b;
  double p;
};

inline DiscreteJoint joint_of(const std::vector<Outcome>& outcomes) {
  std::map<long, std::size_t> ia, ib;
  for (const auto& o : outcomes) {
    ia.emplace(o.a, 0);
    ib.emplace(o.b, 0);
  }
  std::size_t k = 0;
  for (auto& [key, idx] : ia) idx = k++;
  k = 0;
  for (auto& [key, idx] : ib) idx = k++;
  std::vector<double> p(ia.size() * ib.size(), 0.0);
  for (const auto& o : outcomes) p[ia[o.a] * ib.size() + ib[o.b]] += o.p;
  long double total = 0.0L;
  for (double v : p) total += v;
  for (double& v : p) v = static_cast<double>(v / total);
  return DiscreteJoint(ia.size(), ib.size(), std::move(p));
}

// ---------------------------------------------------------------------------
// Sample estimators.

/// Plug-in MI on an equal-width bins x bins histogram over the sample range.
inline double mi_histogram(const std::vector<double>& a, const std::vector<double>& b, std::size_t bins) {
  if (a.size() != b.size()) throw ShapeError("mi_histogram: sample lengths differ");
  if (bins == 0) throw ConfigError("mi_histogram: bins must be positive");
  if (a.size() < 4 * bins * bins) {
    throw ConfigError("mi_histogram: need at least " + std::to_string(4 * bins * bins) + " samples for " +
                      std::to_string(bins) + " bins, got " + std::to_string(a.size()));
  }
  auto binner = [bins](const std::vector<double>& v) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<std::size_t> idx(v.size(), 0);
    if (!(hi > lo)) return idx;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto k = static_cast<std::size_t>(std::floor((v[i] - lo) / (hi - lo) * static_cast<double>(bins)));
      idx[i] = std::min(k, bins - 1);
    }
    return idx;
  };
  const auto ia = binner(a), ib = binner(b);
  std::vector<double> joint(bins * bins, 0.0), pa(bins, 0.0), pb(bins, 0.0);
  const double w = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[ia[i] * bins + ib[i]] += w;
    pa[ia[i]] += w;
    pb[ib[i]] += w;
  }
  double mi = 0.0;
  for (std::size_t x = 0; x < bins; ++x)
    for (std::size_t y = 0; y < bins; ++y) {
      const double v = joint[x * bins + y];
      if (v > 0.0) mi += v * std::log2(v / (pa[x] * pb[y]));
    }
  return std::max(0.0, mi);
}

namespace detail {

/// Rows of an (n) or (n, ...) tensor as points.
inline std::vector<std::vector<double>> points(const Tensor& t) {
  const std::size_t n = t.dim(0), w = t.numel() / n;
  std::vector<std::vector<double>> out(n, std::vector<double>(w));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < w; ++k) out[i][k] = t[i * w + k];
  return out;
}

inline std::vector<double> sq_distances(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) s += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
      d[i * n + j] = d[j * n + i] = s;
    }
  return d;
}

/// Gaussian Gram matrix with bandwidth = median pairwise distance.
inline std::vector<double> gaussian_gram(const Tensor& t, const char* which) {
  const std::size_t n = t.dim(0);
  const auto d2 = sq_distances(points(t));
  std::vector<double> upper;
  upper.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) upper.push_back(std::sqrt(d2[i * n + j]));
  const std::size_t m = upper.size();
  std::nth_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(m / 2), upper.end());
  double med = upper[m / 2];
  if (m % 2 == 0) {
    const double lower = *std::max_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(m / 2));
    med = 0.5 * (med + lower);
  }
  if (!(med > 0.0)) throw DegenerateBatchError(std::string("hsic: zero median pairwise distance in ") + which);
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n * n; ++i) k[i] = std::exp(-d2[i] / (2.0 * med * med));
  return k;
}

/// H K H with H = I - 11^T / n.
inline std::vector<double> double_center(std::vector<double> k, std::size_t n) {
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double all = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += k[i * n + j];
      col[j] += k[i * n + j];
      all += k[i * n + j];
    }
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k[i * n + j] += all / (dn * dn) - row[i] / dn - col[j] / dn;
  return k;
}

inline void check_hsic_inputs(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || b.rank() == 0 || a.dim(0) != b.dim(0)) throw ShapeError("hsic: sample counts differ");
  if (a.dim(0) < 8) throw ConfigError("hsic: need at least 8 samples");
}

/// tr(Kc L_perm) over the upper triangle; both matrices are symmetric.
inline double hsic_from(const std::vector<double>& kc, const std::vector<double>& l, std::size_t n,
                        const std::vector<std::size_t>* perm) {
  double diag = 0.0, off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pi = perm ? (*perm)[i] : i;
    const double* krow = &kc[i * n];
    const double* lrow = &l[pi * n];
    diag += krow[i] * lrow[pi];
    double s = 0.0;
    if (perm) {
      for (std::size_t j = i + 1; j < n; ++j) s += krow[j] * lrow[(*perm)[j]];
    } else {
      for (std::size_t j = i + 1; j < n; ++j) s += krow[j] * lrow[j];
    }
    off += s;
  }
  return (diag + 2.0 * off) / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace detail

/// Biased HSIC, tr(K H L H) / n^2, Gaussian kernels with median bandwidth.
inline double hsic(const Tensor& a, const Tensor& b) {
  detail::check_hsic_inputs(a, b);
  const std::size_t n = a.dim(0);
  const auto kc = detail::double_center(detail::gaussian_gram(a, "a"), n);
  return detail::hsic_from(kc, detail::gaussian_gram(b, "b"), n, nullptr);
}

/// Empirical `quantile` of HSIC over m seeded permutations of b.
inline double hsic_permutation_threshold(const Tensor& a, const Tensor& b, std::size_t m, double quantile,
                                         std::uint64_t seed) {
  detail::check_hsic_inputs(a, b);
  if (m == 0) throw ConfigError("hsic_permutation_threshold: need at least one permutation");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("hsic_permutation_threshold: quantile must lie in (0, 1]");
  const std::size_t n = a.dim(0);
  const auto kc = detail::double_center(detail::gaussian_gram(a, "a"), n);
  const auto l = detail::gaussian_gram(b, "b");
  std::vector<double> stats(m);
  parallel_for(m, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    const auto perm = rng.permutation(n);
    stats[k] = detail::hsic_from(kc, l, n, &perm);
  });
  std::sort(stats.begin(), stats.end());
  const auto idx = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(m)));
  return stats[std::max<std::size_t>(idx, 1) - 1];
}

/// Mid-ranks (1-based, ties averaged).
inline std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("pearson: lengths differ");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DegenerateBatchError("pearson: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: lengths differ");
  if (a.size() < 3) throw ConfigError("spearman: need at least 3 samples");
  return pearson(mid_ranks(a), mid_ranks(b));
}

}  // namespace icarec::info
