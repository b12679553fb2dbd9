#pragma once

// Reconstruction and independence terms. Every independence term is written
// so the discriminator minimizes it; the autoencoder maximizes it through
// loss_ae = recon - lambda * ind.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icarec/autodiff.hpp"
#include "icarec/error.hpp"
#include "icarec/rng.hpp"

namespace icarec::obj {

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

enum class ReconKind { l1, mse };
enum class IndKind { domain_confusion, regression, contrastive, scale_invariant };

struct ObjectiveConfig {
  ReconKind recon = ReconKind::l1;
  IndKind ind = IndKind::regression;
  double lambda = 0.05;
};

inline std::string to_string(ReconKind k) { return k == ReconKind::l1 ? "l1" : "mse"; }

inline std::string to_string(IndKind k) {
  switch (k) {
    case IndKind::domain_confusion: return "domain_confusion";
    case IndKind::regression: return "regression";
    case IndKind::contrastive: return "contrastive";
    case IndKind::scale_invariant: return "scale_invariant";
  }
  return "regression";
}

inline ReconKind recon_from_string(const std::string& s) {
  if (s == "l1") return ReconKind::l1;
  if (s == "mse") return ReconKind::mse;
  throw ConfigError("unknown reconstruction loss '" + s + "'");
}

inline IndKind ind_from_string(const std::string& s) {
  for (IndKind k : {IndKind::domain_confusion, IndKind::regression, IndKind::contrastive, IndKind::scale_invariant}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown independence term '" + s + "'");
}

namespace detail {

inline void same_shape(const ad::Node& a, const ad::Node& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
  }
}

// Views a batch as (B, d): (B) -> (B,1); higher ranks are flattened per sample.
inline ad::Node as_matrix(const ad::Node& a) {
  const Shape& s = a.shape();
  const std::size_t rows = s[0];
  const std::size_t cols = a.value().numel() / rows;
  if (s.size() == 2) return a;
  return ad::reshape(a, {rows, cols});
}

}  // namespace detail

inline ad::Node recon_l1(const ad::Node& xhat, const ad::Node& x) {
  detail::same_shape(xhat, x, "recon_l1");
  return ad::mean(ad::abs(xhat - x));
}

inline ad::Node recon_mse(const ad::Node& xhat, const ad::Node& x) {
  detail::same_shape(xhat, x, "recon_mse");
  return ad::mean(ad::square(xhat - x));
}

inline ad::Node recon(ReconKind kind, const ad::Node& xhat, const ad::Node& x) {
  return kind == ReconKind::l1 ? recon_l1(xhat, x) : recon_mse(xhat, x);
}

/// Mean cross-entropy of softmax(logits) against class labels.
inline ad::Node ind_domain_confusion(const ad::Node& logits, const std::vector<std::size_t>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size()) {
    throw ShapeError("ind_domain_confusion: logits " + shape_str(s) + " do not match " + std::to_string(labels.size()) +
                     " labels");
  }
  const std::size_t batch = s[0], k = s[1];
  std::vector<double> onehot(batch * k, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= k) {
      throw ConfigError("ind_domain_confusion: label " + std::to_string(labels[b]) + " out of range [0, " +
                        std::to_string(k) + ")");
    }
    onehot[b * k + labels[b]] = 1.0;
  }
  const ad::Node picked = ad::log_softmax(logits) * ad::constant(Tensor({batch, k}, std::move(onehot)));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(batch));
}

/// Batch Pearson r^2 between a and b. For multi-column inputs the columns
/// are paired and the per-column r^2 averaged.
inline ad::Node squared_correlation(const ad::Node& a, const ad::Node& b) {
  if (a.shape().empty() || b.shape().empty() || a.shape()[0] != b.shape()[0]) {
    throw ShapeError("squared_correlation: batch sizes differ (" + shape_str(a.shape()) + " vs " + shape_str(b.shape()) +
                     ")");
  }
  const ad::Node am = detail::as_matrix(a);
  const ad::Node bm = detail::as_matrix(b);
  if (am.shape() != bm.shape()) {
    throw ShapeError("squared_correlation: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " do not pair up");
  }
  const std::size_t n = am.shape()[0];
  if (n < 2) throw DegenerateBatchError("squared_correlation: degenerate batch (fewer than 2 samples)");
  const ad::Node ac = am - ad::mean(am, 0);
  const ad::Node bc = bm - ad::mean(bm, 0);
  const ad::Node va = ad::sum(ad::square(ac), 0);
  const ad::Node vb = ad::sum(ad::square(bc), 0);
  for (std::size_t j = 0; j < va.value().numel(); ++j) {
    const double denom = static_cast<double>(n - 1);
    if (va.value()[j] / denom <= kVarianceFloor || vb.value()[j] / denom <= kVarianceFloor) {
      throw DegenerateBatchError("squared_correlation: degenerate batch (variance below floor)");
    }
  }
  const ad::Node cov = ad::sum(ac * bc, 0);
  return ad::mean(ad::square(cov) / (va * vb));
}

inline ad::Node ind_regression(const ad::Node& disc_out, const ad::Node& t) {
  return ad::scale(squared_correlation(disc_out, t), -1.0);
}

/// Mean binary cross-entropy of sigmoid(logit) against 0/1 labels.
inline ad::Node ind_contrastive(const ad::Node& logits, const std::vector<int>& labels) {
  if (logits.value().numel() != labels.size()) {
    throw ShapeError("ind_contrastive: " + std::to_string(logits.value().numel()) + " logits for " +
                     std::to_string(labels.size()) + " labels");
  }
  bool has0 = false, has1 = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ConfigError("ind_contrastive: labels must be 0 or 1");
    has0 = has0 || l == 0;
    has1 = has1 || l == 1;
  }
  if (!has0 || !has1) throw DegenerateBatchError("ind_contrastive: degenerate batch (only one tuple class)");
  std::vector<double> lv(labels.begin(), labels.end());
  const ad::Node z = ad::reshape(logits, {labels.size()});
  // softplus(z) - l z == -[l log sigmoid(z) + (1-l) log(1 - sigmoid(z))]
  return ad::mean(ad::softplus(z) - ad::constant(Tensor::vector(std::move(lv))) * z);
}

/// Random permutation without fixed points (Sattolo's algorithm).
inline std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw DegenerateBatchError("derangement needs at least 2 elements");
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(i)]);
  return p;
}

/// || |x|/||x||_F - |y|/||y||_F ||_F
inline ad::Node ind_scale_invariant(const ad::Node& x, const ad::Node& y) {
  detail::same_shape(x, y, "ind_scale_invariant");
  const ad::Node nx = ad::frobenius_norm(x);
  const ad::Node ny = ad::frobenius_norm(y);
  if (nx.value().item() <= kNormFloor || ny.value().item() <= kNormFloor) {
    throw DegenerateBatchError("ind_scale_invariant: degenerate batch (norm below floor)");
  }
  return ad::frobenius_norm(ad::abs(x) / nx - ad::abs(y) / ny);
}

inline ad::Node loss_ae(const ad::Node& recon, const ad::Node& ind, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("loss_ae: lambda must be nonnegative");
  if (lambda == 0.0) return recon;
  return recon - ad::scale(ind, lambda);
}

inline ad::Node loss_disc(const ad::Node& ind) { return ind; }

}  // namespace icarec::obj
