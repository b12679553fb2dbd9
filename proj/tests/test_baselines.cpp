#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "icarec/baselines.hpp"
#include "icarec/datagen.hpp"
#include "icarec/eval.hpp"

namespace bl = icarec::baselines;
namespace data = icarec::data;
using icarec::Rng;
using icarec::Tensor;

namespace {

std::vector<double> noise(Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = sd * rng.normal();
  return v;
}

double energy(const std::vector<double>& v, std::size_t from = 0) {
  double e = 0;
  for (std::size_t i = from; i < v.size(); ++i) e += v[i] * v[i];
  return e;
}

// Solves (U^T U + delta I) w = U^T p over the full record.
Eigen::VectorXd normal_equations(const std::vector<double>& p, const bl::Channels& ref, std::size_t taps, double delta) {
  const auto n = static_cast<Eigen::Index>(p.size());
  const auto m = static_cast<Eigen::Index>(taps * ref.size());
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index k = 0; k < n; ++k)
    for (std::size_t c = 0; c < ref.size(); ++c)
      for (std::size_t j = 0; j < taps; ++j)
        if (static_cast<std::size_t>(k) >= j) u(k, static_cast<Eigen::Index>(c * taps + j)) = ref[c][static_cast<std::size_t>(k) - j];
  const Eigen::VectorXd pv = Eigen::Map<const Eigen::VectorXd>(p.data(), n);
  const Eigen::MatrixXd a = u.transpose() * u + delta * Eigen::MatrixXd::Identity(m, m);
  return a.ldlt().solve(u.transpose() * pv);
}

}  // namespace

TEST(Lms, ProportionalReferenceCancels) {
  Rng rng(1);
  const auto r = noise(rng, 10000);
  std::vector<double> p(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) p[i] = 2.0 * r[i];
  const auto out = bl::lms_cancel(p, {r}, {1, 0.01, 0.999, 0.01});
  EXPECT_LT(energy(out.residual, 9000) / energy(p, 9000), 1e-4);
  EXPECT_NEAR(out.weights[0], 2.0, 1e-3);
}

TEST(Lms, IndependentReferenceLeavesPrimary) {
  Rng rng(2);
  const auto r = noise(rng, 10000), p = noise(rng, 10000);
  const auto out = bl::lms_cancel(p, {r});
  EXPECT_GT(energy(out.residual) / energy(p), 0.9);
  // Misadjustment jitter has standard deviation near sqrt(mu / 2).
  for (double w : out.weights) EXPECT_LT(std::abs(w), 0.25);
}

TEST(Lms, ZeroStepLeavesPrimary) {
  Rng rng(3);
  const auto r = noise(rng, 500), p = noise(rng, 500);
  EXPECT_EQ(bl::lms_cancel(p, {r}, {4, 0.0, 0.999, 0.01}).residual, p);
}

TEST(Lms, StableBelowStepBoundAndDivergenceReported) {
  Rng rng(4);
  const auto r = noise(rng, 5000), p = noise(rng, 5000);
  const std::size_t taps = 8;
  const double bound = 2.0 / (static_cast<double>(taps) * 1.0);
  const auto out = bl::lms_cancel(p, {r}, {taps, 0.1 * bound, 1.0, 0.01});
  for (double v : out.residual) EXPECT_LT(std::abs(v), 100.0);
  EXPECT_THROW(bl::lms_cancel(p, {r}, {taps, 5.0 * bound, 1.0, 0.01}), icarec::NonFiniteError);
}

TEST(Lms, InputValidation) {
  EXPECT_THROW(bl::lms_cancel({1, 2}, {{0, 0}}), icarec::ConfigError);
  EXPECT_THROW(bl::lms_cancel({1, 2}, {{1, 2, 3}}), icarec::ShapeError);
  EXPECT_THROW(bl::lms_cancel({1, 2}, {{1, 2}}, {0, 0.01, 1, 1}), icarec::ConfigError);
  EXPECT_THROW(bl::rls_cancel({1, 2}, {{1, 2}}, {1, 0.01, 1.5, 1}), icarec::ConfigError);
  EXPECT_THROW(bl::rls_cancel({1, 2}, {{1, 2}}, {1, 0.01, 1, 0}), icarec::ConfigError);
}

TEST(Rls, ProportionalReferenceConvergesFast) {
  Rng rng(5);
  const auto r = noise(rng, 1000);
  std::vector<double> p(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) p[i] = 2.0 * r[i];
  const auto out = bl::rls_cancel(p, {r}, {1, 0.01, 0.999, 0.01});
  EXPECT_LT(energy(out.residual, 100) / energy(p, 100), 1e-6);
}

TEST(Rls, UnitForgettingMatchesRegularizedNormalEquations) {
  Rng rng(6);
  const std::size_t n = 3000, taps = 4;
  const bl::Channels ref{noise(rng, n), noise(rng, n)};
  auto p = noise(rng, n, 0.1);
  for (std::size_t k = 3; k < n; ++k) p[k] += 0.7 * ref[0][k] - 0.3 * ref[0][k - 2] + 1.1 * ref[1][k - 3];
  const auto out = bl::rls_cancel(p, ref, {taps, 0.01, 1.0, 0.01});
  const auto w = normal_equations(p, ref, taps, 0.01);
  for (std::size_t i = 0; i < out.weights.size(); ++i) EXPECT_NEAR(out.weights[i], w(static_cast<Eigen::Index>(i)), 1e-9);
}

TEST(Rls, UnitForgettingMatchesLeastSquares) {
  Rng rng(7);
  const std::size_t n = 4000, taps = 3;
  const bl::Channels ref{noise(rng, n)};
  auto p = noise(rng, n, 0.2);
  for (std::size_t k = 2; k < n; ++k) p[k] += ref[0][k] + 0.5 * ref[0][k - 1] - 0.25 * ref[0][k - 2];
  const auto out = bl::rls_cancel(p, ref, {taps, 0.01, 1.0, 1e-6});
  const auto w = normal_equations(p, ref, taps, 0.0);
  for (std::size_t i = 0; i < taps; ++i) EXPECT_NEAR(out.weights[i], w(static_cast<Eigen::Index>(i)), 1e-6);
}

TEST(Rls, IdenticalReferenceResidualVanishes) {
  Rng rng(8);
  const auto r = noise(rng, 4000);
  const auto out = bl::rls_cancel(r, {r}, {1, 0.01, 0.999, 0.01});
  EXPECT_LT(energy(out.residual, 3000) / energy(r, 3000), 1e-12);
}

TEST(Cancellers, Deterministic) {
  Rng rng(9);
  const auto r = noise(rng, 800), p = noise(rng, 800);
  EXPECT_EQ(bl::rls_cancel(p, {r}).residual, bl::rls_cancel(p, {r}).residual);
  EXPECT_EQ(bl::lms_cancel(p, {r}).residual, bl::lms_cancel(p, {r}).residual);
}

TEST(Multichannel, SingleChannelEqualsDirectCall) {
  Rng rng(10);
  const auto r = noise(rng, 600), p = noise(rng, 600);
  const Tensor x({1, 600}, p), t({1, 600}, r);
  EXPECT_EQ(bl::cancel_multichannel(x, t, bl::Method::lms).values(), bl::lms_cancel(p, {r}).residual);
  EXPECT_EQ(bl::cancel_multichannel(x, t, bl::Method::rls).values(), bl::rls_cancel(p, {r}).residual);
  EXPECT_THROW(bl::cancel_multichannel(x, Tensor({1, 5}, {1, 2, 3, 4, 5}), bl::Method::lms), icarec::ShapeError);
}

TEST(Multichannel, RlsRaisesPresenceRatioOnFecg) {
  data::FecgConfig c;
  c.n_a = 6;
  c.record_length = 20000;
  const auto rec = data::gen_fecg_record(c, 1);
  const auto off = data::contiguous_offsets(rec.length(), c.n_T);
  const Tensor res = bl::cancel_multichannel(rec.abdominal, rec.thorax, bl::Method::rls);
  const auto rx = icarec::eval::presence_ratio(icarec::eval::split_segments(data::cut_segments(rec.abdominal, off, c.n_T)), 270, 430);
  const auto rr = icarec::eval::presence_ratio(icarec::eval::split_segments(data::cut_segments(res, off, c.n_T)), 270, 430);
  ASSERT_TRUE(rx.r && rr.r);
  EXPECT_GT(*rr.r, *rx.r);
}

TEST(Multichannel, NoFetalLeavesNoiseAndFlagsFloor) {
  data::FecgConfig c;
  c.n_a = 4;
  c.alpha = 0.0;
  c.record_length = 20000;
  const auto rec = data::gen_fecg_record(c, 2);
  const auto off = data::contiguous_offsets(rec.length(), c.n_T);
  const Tensor res = bl::cancel_multichannel(rec.abdominal, rec.thorax, bl::Method::rls);
  // Past convergence the residual sits at the noise level.
  std::vector<double> tail(res.values().begin() + 1000, res.values().begin() + 20000);
  EXPECT_LT(energy(tail) / static_cast<double>(tail.size()), 10 * c.sigma * c.sigma);
  const auto rr = icarec::eval::presence_ratio(icarec::eval::split_segments(data::cut_segments(res, off, c.n_T)), 270, 430);
  EXPECT_LT(rr.a_m, 0.1);
}
