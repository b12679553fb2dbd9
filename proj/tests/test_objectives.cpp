#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "icarec/gradcheck.hpp"
#include "icarec/objectives.hpp"

namespace ad = icarec::ad;
namespace obj = icarec::obj;
using icarec::Rng;
using icarec::Tensor;

namespace {

Tensor random_tensor(Rng& rng, icarec::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(icarec::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

ad::Node c(const Tensor& t) { return ad::constant(t); }

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Recon, IdenticalInputsGiveZero) {
  const Tensor x = Tensor::vector({1.5, -2.0, 3.0});
  EXPECT_EQ(obj::recon_l1(c(x), c(x)).value().item(), 0.0);
  EXPECT_EQ(obj::recon_mse(c(x), c(x)).value().item(), 0.0);
}

TEST(Recon, HandArithmetic) {
  const auto xh = c(Tensor::vector({0, 0})), x = c(Tensor::vector({1, -1}));
  EXPECT_EQ(obj::recon_l1(xh, x).value().item(), 1.0);
  EXPECT_EQ(obj::recon_mse(xh, x).value().item(), 1.0);
}

TEST(Recon, MatchesLoopOracle) {
  Rng rng(1);
  const Tensor a = random_tensor(rng, {7, 3}), b = random_tensor(rng, {7, 3});
  double l1 = 0, l2 = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    l1 += std::abs(a[i] - b[i]);
    l2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  EXPECT_NEAR(obj::recon_l1(c(a), c(b)).value().item(), l1 / 21.0, 1e-12);
  EXPECT_NEAR(obj::recon_mse(c(a), c(b)).value().item(), l2 / 21.0, 1e-12);
}

TEST(Recon, ShapeMismatch) {
  EXPECT_THROW(obj::recon_l1(c(Tensor::ones({2, 3})), c(Tensor::ones({3}))), icarec::ShapeError);
}

TEST(DomainConfusion, UniformLogitsGiveLogK) {
  for (std::size_t k = 2; k <= 10; ++k) {
    std::vector<std::size_t> labels{0, k - 1, k / 2, 1};
    const auto v = obj::ind_domain_confusion(c(Tensor::zeros({4, k})), labels).value().item();
    EXPECT_NEAR(v, std::log(static_cast<double>(k)), 1e-12) << k;
  }
  EXPECT_NEAR(obj::ind_domain_confusion(c(Tensor::zeros({2, 3})), {0, 2}).value().item(), 1.0986, 1e-4);
}

TEST(DomainConfusion, ConfidentCorrectLogitsNearZero) {
  const Tensor logits({2, 3}, {30, 0, 0, 0, 0, 30});
  EXPECT_LT(obj::ind_domain_confusion(c(logits), {0, 2}).value().item(), 1e-10);
}

TEST(DomainConfusion, MatchesFormulaOracle) {
  Rng rng(2);
  const Tensor logits = random_tensor(rng, {5, 4}, -3, 3);
  const std::vector<std::size_t> labels{3, 0, 1, 1, 2};
  double total = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    double z = 0;
    for (std::size_t j = 0; j < 4; ++j) z += std::exp(logits.at({b, j}));
    total += -(logits.at({b, labels[b]}) - std::log(z));
  }
  EXPECT_NEAR(obj::ind_domain_confusion(c(logits), labels).value().item(), total / 5, 1e-12);
  EXPECT_THROW(obj::ind_domain_confusion(c(logits), {4, 0, 0, 0, 0}), icarec::ConfigError);
}

TEST(SquaredCorrelation, SelfIsOne) {
  const Tensor a = Tensor::vector({0.3, 1.2, -0.5, 2.2});
  EXPECT_NEAR(obj::squared_correlation(c(a), c(a)).value().item(), 1.0, 1e-15);
}

TEST(SquaredCorrelation, HandExample) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(pearson(a, b), 0.8, 1e-15);
  EXPECT_NEAR(obj::squared_correlation(c(Tensor::vector(a)), c(Tensor::vector(b))).value().item(), 0.64, 1e-12);
  EXPECT_NEAR(obj::ind_regression(c(Tensor::vector(a)), c(Tensor::vector(b))).value().item(), -0.64, 1e-12);
}

TEST(SquaredCorrelation, ConstantInputIsDegenerate) {
  EXPECT_THROW(obj::squared_correlation(c(Tensor::full({5}, 2.0)), c(Tensor::vector({1, 2, 3, 4, 5}))),
               icarec::DegenerateBatchError);
}

TEST(SquaredCorrelation, AffineInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(rng, {30, 1}), b = random_tensor(rng, {30, 1});
    const double alpha = rng.uniform(-5, 5), beta = rng.uniform(-5, 5);
    if (std::abs(alpha) < 0.1) continue;
    const Tensor a2 = icarec::map(a, [&](double v) { return alpha * v + beta; });
    EXPECT_NEAR(obj::squared_correlation(c(a), c(b)).value().item(),
                obj::squared_correlation(c(a2), c(b)).value().item(), 1e-10);
  }
}

TEST(SquaredCorrelation, PerColumnMean) {
  Rng rng(4);
  const Tensor a = random_tensor(rng, {20, 2}), b = random_tensor(rng, {20, 2});
  std::vector<double> a0, a1, b0, b1;
  for (std::size_t i = 0; i < 20; ++i) {
    a0.push_back(a.at({i, 0}));
    a1.push_back(a.at({i, 1}));
    b0.push_back(b.at({i, 0}));
    b1.push_back(b.at({i, 1}));
  }
  const double expect = 0.5 * (std::pow(pearson(a0, b0), 2) + std::pow(pearson(a1, b1), 2));
  EXPECT_NEAR(obj::squared_correlation(c(a), c(b)).value().item(), expect, 1e-12);
}

TEST(Contrastive, ZeroLogitsGiveLog2) {
  EXPECT_NEAR(obj::ind_contrastive(c(Tensor::zeros({4})), {1, 0, 1, 0}).value().item(), std::log(2.0), 1e-15);
}

TEST(Contrastive, SeparatedLogitsNearZero) {
  EXPECT_LT(obj::ind_contrastive(c(Tensor::vector({20, -20, 20, -20})), {1, 0, 1, 0}).value().item(), 1e-8);
}

TEST(Contrastive, MatchesBceOracle) {
  Rng rng(5);
  const Tensor z = random_tensor(rng, {6}, -4, 4);
  const std::vector<int> l{1, 0, 0, 1, 1, 0};
  double total = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    total += -(l[i] * std::log(p) + (1 - l[i]) * std::log(1 - p));
  }
  EXPECT_NEAR(obj::ind_contrastive(c(z), l).value().item(), total / 6, 1e-12);
}

TEST(Contrastive, SingleClassIsDegenerate) {
  EXPECT_THROW(obj::ind_contrastive(c(Tensor::zeros({3})), {1, 1, 1}), icarec::DegenerateBatchError);
}

TEST(Contrastive, DerangementHasNoFixedPoints) {
  Rng rng(6);
  for (std::size_t n = 2; n < 40; ++n) {
    auto p = obj::derangement(n, rng);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NE(p[i], i);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], i);
  }
}

TEST(ScaleInvariant, SelfAndScaledCopiesGiveZero) {
  Rng rng(7);
  const Tensor s = random_tensor(rng, {3, 2, 10});
  EXPECT_EQ(obj::ind_scale_invariant(c(s), c(s)).value().item(), 0.0);
  const Tensor neg = icarec::map(s, [](double v) { return -3.0 * v; });
  EXPECT_NEAR(obj::ind_scale_invariant(c(s), c(neg)).value().item(), 0.0, 1e-7);
  for (double k : {0.01, -7.0, 123.0}) {
    const Tensor sc = icarec::map(s, [k](double v) { return k * v; });
    EXPECT_NEAR(obj::ind_scale_invariant(c(s), c(sc)).value().item(), 0.0, 1e-7);
  }
}

TEST(ScaleInvariant, SymmetricAndMatchesOracle) {
  Rng rng(8);
  const Tensor a = random_tensor(rng, {4, 5}), b = random_tensor(rng, {4, 5});
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  double d = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) d += std::pow(std::abs(a[i]) / na - std::abs(b[i]) / nb, 2);
  const double v = obj::ind_scale_invariant(c(a), c(b)).value().item();
  EXPECT_NEAR(v, std::sqrt(d), 1e-12);
  EXPECT_NEAR(v, obj::ind_scale_invariant(c(b), c(a)).value().item(), 1e-15);
  EXPECT_THROW(obj::ind_scale_invariant(c(Tensor::zeros({4, 5})), c(b)), icarec::DegenerateBatchError);
}

TEST(Composite, LossArithmetic) {
  const auto r = c(Tensor::scalar(0.5)), i = c(Tensor::scalar(0.2));
  EXPECT_NEAR(obj::loss_ae(r, i, 0.05).value().item(), 0.49, 1e-15);
  EXPECT_EQ(obj::loss_ae(r, i, 0.0).value().item(), 0.5);
  EXPECT_EQ(obj::loss_disc(i).value().item(), 0.2);
  EXPECT_THROW(obj::loss_ae(r, i, -1.0), icarec::ConfigError);
}

TEST(Composite, GradientDecomposes) {
  Rng rng(9);
  const Tensor x = random_tensor(rng, {12, 2}), t = random_tensor(rng, {12, 1});
  const Tensor w = random_tensor(rng, {2, 1}), v = random_tensor(rng, {1, 2});
  const double lambda = 0.3;
  auto recon_of = [&](const ad::Node& wl) {
    const auto code = ad::tanh(ad::matmul(c(x), wl));
    return obj::recon_mse(ad::matmul(code, c(v)), c(x));
  };
  auto ind_of = [&](const ad::Node& wl) { return obj::ind_regression(ad::tanh(ad::matmul(c(x), wl)), c(t)); };
  const auto w0 = ad::leaf(w), w1 = ad::leaf(w), w2 = ad::leaf(w);
  const auto total = ad::backward(obj::loss_ae(recon_of(w0), ind_of(w0), lambda)).of(w0);
  const auto gr = ad::backward(recon_of(w1)).of(w1);
  const auto gi = ad::backward(ind_of(w2)).of(w2);
  for (std::size_t k = 0; k < w.numel(); ++k) EXPECT_NEAR(total[k], gr[k] - lambda * gi[k], 1e-13);
  auto fn = [&](const std::vector<ad::Node>& p) { return obj::loss_ae(recon_of(p[0]), ind_of(p[0]), lambda); };
  EXPECT_LT(ad::grad_check(fn, {w}), 1e-5);
}

TEST(GradCheck, AllObjectives) {
  Rng rng(10);
  const Tensor a = random_tensor(rng, {8, 3}), b = random_tensor(rng, {8, 3});
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 2, 1};
  const std::vector<int> tf{1, 0, 1, 0, 1, 0, 1, 0};
  const Tensor z = random_tensor(rng, {8});
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::recon_l1(p[0], c(b)); }, {a}), 1e-5);
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::recon_mse(p[0], c(b)); }, {a}), 1e-5);
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::ind_domain_confusion(p[0], labels); }, {a}),
            1e-5);
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::squared_correlation(p[0], p[1]); }, {a, b}),
            1e-5);
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::ind_contrastive(p[0], tf); }, {z}), 1e-5);
  EXPECT_LT(ad::grad_check([&](const std::vector<ad::Node>& p) { return obj::ind_scale_invariant(p[0], p[1]); }, {a, b}),
            1e-5);
}
