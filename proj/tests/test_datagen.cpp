#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "icarec/dataset_io.hpp"

namespace data = icarec::data;
using icarec::Tensor;

namespace {

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

std::vector<double> column(const Tensor& t, std::size_t c) {
  const std::size_t w = t.numel() / t.dim(0);
  std::vector<double> out(t.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i * w + c];
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "icarec_test_datagen";
  std::filesystem::create_directories(dir);
  return dir / name;
}

data::FecgConfig small_fecg() {
  data::FecgConfig c;
  c.n_a = 4;
  c.n_t = 2;
  c.record_length = 6000;
  c.train_segments = 8;
  c.train_length = 300;
  return c;
}

}  // namespace

TEST(UniformSources, InUnitSquareAndSeeded) {
  const auto a = data::gen_uniform_sources(1000, 5);
  const auto b = data::gen_uniform_sources(1000, 5);
  const auto c = data::gen_uniform_sources(1000, 6);
  for (std::size_t i = 0; i < 1000; ++i) {
    EXPECT_GE(a.s[i], 0.0);
    EXPECT_LT(a.s[i], 1.0);
    EXPECT_GE(a.t[i], 0.0);
    EXPECT_LT(a.t[i], 1.0);
  }
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.t, b.t);
  EXPECT_NE(a.s, c.s);
  EXPECT_THROW(data::gen_uniform_sources(0, 1), icarec::ConfigError);
}

TEST(UniformSources, CorrelationWithinStatisticalBound) {
  const std::size_t n = 10000;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto src = data::gen_uniform_sources(n, seed);
    EXPECT_LT(std::abs(pearson(src.s, src.t)), 3.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Mixing, IdentityPassesThrough) {
  const data::Matrix2 id{{{1, 0}, {0, 1}}};
  const Tensor x = data::mix_linear({0.25, 0.75}, {0.5, 0.125}, id);
  EXPECT_EQ(x, Tensor({2, 2}, {0.25, 0.5, 0.75, 0.125}));
}

TEST(Mixing, DefaultMatrixHandValues) {
  const Tensor x = data::mix_linear({0.5}, {0.5}, data::kDefaultMixing);
  EXPECT_EQ(x, Tensor({1, 2}, {1.0, 0.0}));
  const Tensor y = data::mix_nonlinear({0.5}, {0.5}, data::kDefaultMixing);
  EXPECT_NEAR(y[0], std::log(1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(y[1], std::log(2.0), 1e-15);
  EXPECT_NEAR(y[0], 1.3133, 1e-4);
  EXPECT_NEAR(y[1], 0.6931, 1e-4);
}

TEST(Mixing, SingularMatrixRejected) {
  const data::Matrix2 sing{{{1, 2}, {2, 4}}};
  EXPECT_THROW(data::mix_linear({0.1}, {0.2}, sing), icarec::ConfigError);
  EXPECT_THROW(data::mix_nonlinear({0.1}, {0.2}, sing), icarec::ConfigError);
  const data::Matrix2 near{{{1, 1}, {1, 1 + 1e-7}}};
  EXPECT_THROW(data::mix_linear({0.1}, {0.2}, near), icarec::ConfigError);
}

TEST(Mixing, NonlinearJacobianNonzeroAtSamplePoints) {
  // Independent finite-difference oracle on the closed form softplus(A v).
  const auto src = data::gen_uniform_sources(100, 17);
  const double h = 1e-6;
  auto f = [](double s, double t) {
    return std::array<double, 2>{std::log1p(std::exp(s + t)), std::log1p(std::exp(s - t))};
  };
  for (std::size_t i = 0; i < 100; ++i) {
    const double s = src.s[i], t = src.t[i];
    const auto a = f(s + h, t), b = f(s - h, t), c = f(s, t + h), d = f(s, t - h);
    const double j = ((a[0] - b[0]) * (c[1] - d[1]) - (c[0] - d[0]) * (a[1] - b[1])) / (4 * h * h);
    EXPECT_GT(std::abs(j), 0.1);
  }
}

TEST(Invertibility, LinearGivesAbsDet) {
  data::MixingSpec spec;
  spec.a = {{{2, 1}, {0.5, 3}}};
  EXPECT_NEAR(data::verify_invertibility(spec, 50, 1), 5.5, 1e-6);
}

TEST(Invertibility, SoftplusPositive) {
  data::MixingSpec spec;
  spec.kind = data::MixingKind::softplus_nonlinear;
  EXPECT_GT(data::verify_invertibility(spec, 200, 3), 0.1);
}

TEST(Invertibility, AnglesEmbeddingRegular) {
  data::MixingSpec spec;
  spec.kind = data::MixingKind::angles;
  EXPECT_GT(data::verify_invertibility(spec, 200, 3), 1e-3);
  spec.angles.identity = true;
  EXPECT_NEAR(data::verify_invertibility(spec, 20, 3), 1.0, 1e-6);
}

TEST(Invertibility, FecgNotApplicable) {
  data::MixingSpec spec;
  spec.kind = data::MixingKind::fecg;
  try {
    data::verify_invertibility(spec, 10, 1);
    FAIL();
  } catch (const icarec::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("not applicable"), std::string::npos);
  }
}

TEST(Dataset2D, ShapesAndMeta) {
  data::MixingSpec spec;
  const auto d = data::make_2d_dataset(64, 9, spec);
  EXPECT_EQ(d.pairs.x.shape(), (icarec::Shape{64, 2}));
  EXPECT_EQ(d.pairs.t->shape(), (icarec::Shape{64, 1}));
  EXPECT_EQ(d.s->shape(), (icarec::Shape{64, 1}));
  EXPECT_EQ(d.meta.at("seed"), 9);
  EXPECT_EQ(d.meta.at("generator"), "2d-linear");
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(d.pairs.x[2 * i], (*d.s)[i] + (*d.pairs.t)[i]);
    EXPECT_EQ(d.pairs.x[2 * i + 1], (*d.s)[i] - (*d.pairs.t)[i]);
  }
}

TEST(AnglesToy, IdentityTracesUnitCircle) {
  data::AnglesSpec spec;
  spec.identity = true;
  const auto d = data::gen_rotating_angles_toy(200, 4, spec);
  for (std::size_t i = 0; i < 200; ++i) {
    const double a = d.pairs.x[i * 8], b = d.pairs.x[i * 8 + 1];
    EXPECT_NEAR(a * a + b * b, 1.0, 1e-12);
    EXPECT_NEAR(a, std::cos((*d.s)[i]), 1e-12);
    for (std::size_t k = 4; k < 8; ++k) EXPECT_EQ(d.pairs.x[i * 8 + k], 0.0);
  }
}

TEST(AnglesToy, ConditionCarriesNoSourceInformation) {
  const std::size_t n = 10000;
  const auto d = data::gen_rotating_angles_toy(n, 8, data::AnglesSpec{});
  std::vector<double> cs(n);
  for (std::size_t i = 0; i < n; ++i) cs[i] = std::cos((*d.s)[i]);
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(pearson(column(*d.pairs.t, 0), cs)), bound);
  EXPECT_LT(std::abs(pearson(column(*d.pairs.t, 1), cs)), bound);
}

TEST(AnglesToy, SeededAndEmbeddingShared) {
  data::AnglesSpec spec;
  const auto a = data::gen_rotating_angles_toy(50, 1, spec);
  const auto b = data::gen_rotating_angles_toy(50, 1, spec);
  EXPECT_EQ(a.pairs.x, b.pairs.x);
  EXPECT_EQ(*a.pairs.t, *b.pairs.t);
  // A different sample seed keeps the same map: equal angles give equal x.
  const data::AnglesEmbedding e(spec);
  const auto c = data::gen_rotating_angles_toy(50, 2, spec);
  const auto t = *c.pairs.t;
  const auto x0 = e.at_angles((*c.s)[0], std::atan2(t[1], t[0]));
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(c.pairs.x[k], x0[k], 1e-12);
  EXPECT_THROW(data::AnglesEmbedding(data::AnglesSpec{3, false, 0}), icarec::ConfigError);
}

TEST(AnglesToy, EmbeddingColumnsOrthonormal) {
  icarec::Rng rng(3);
  const auto q = data::random_orthonormal_columns(8, rng);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      double dot = 0;
      for (std::size_t r = 0; r < 8; ++r) dot += q[r * 4 + a] * q[r * 4 + b];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Fecg, CommensuratePeriodsRejected) {
  data::FecgConfig c = small_fecg();
  c.tau_m = 400;
  c.tau_f = 200;
  EXPECT_THROW(data::gen_fecg_record(c, 1), icarec::ConfigError);
  c.tau_f = 300;  // lcm 1200 <= 2000
  EXPECT_THROW(data::gen_fecg_record(c, 1), icarec::ConfigError);
  c.tau_f = 0;
  EXPECT_THROW(data::gen_fecg_record(c, 1), icarec::ConfigError);
  c = small_fecg();
  c.alpha = 1.0;
  EXPECT_THROW(data::gen_fecg_record(c, 1), icarec::ConfigError);
}

TEST(Fecg, ZeroAlphaAndNoiseGivesPureMaternal) {
  data::FecgConfig c = small_fecg();
  c.alpha = 0.0;
  c.sigma = 0.0;
  const auto r = data::gen_fecg_record(c, 3);
  const std::size_t len = r.length();
  for (std::size_t ch = 0; ch < c.n_a; ++ch) {
    const double g = r.abdominal[ch * len + 1000] / r.maternal[1000];
    for (std::size_t t = 0; t < len; t += 7) EXPECT_NEAR(r.abdominal[ch * len + t], g * r.maternal[t], 1e-12);
  }
}

TEST(Fecg, BeatTrainPeriodicWithUnitRPeaks) {
  const auto m = data::beat_train(3000, 430, 100.0);
  EXPECT_NEAR(m[100], 1.0, 0.02);
  EXPECT_NEAR(m[530], 1.0, 0.02);
  for (std::size_t t = 200; t + 430 < 3000; t += 37) EXPECT_NEAR(m[t], m[t + 430], 1e-9);
}

TEST(Fecg, ThoraxUncorrelatedWithFetal) {
  data::FecgConfig c = small_fecg();
  c.record_length = 60000;
  const auto r = data::gen_fecg_record(c, 5);
  const std::vector<double> fetal = r.fetal.values();
  const std::size_t len = r.length();
  for (std::size_t ch = 0; ch < c.n_t; ++ch) {
    std::vector<double> th(r.thorax.values().begin() + static_cast<std::ptrdiff_t>(ch * len),
                           r.thorax.values().begin() + static_cast<std::ptrdiff_t>((ch + 1) * len));
    EXPECT_LT(std::abs(pearson(th, fetal)), 0.05);
  }
}

TEST(Fecg, SegmentsAndDeterminism) {
  const auto c = small_fecg();
  const auto a = data::gen_synthetic_fecg(c, 11);
  const auto b = data::gen_synthetic_fecg(c, 11);
  EXPECT_EQ(a.pairs.x, b.pairs.x);
  EXPECT_EQ(a.pairs.x.shape(), (icarec::Shape{8, 4, 300}));
  EXPECT_EQ(a.pairs.t->shape(), (icarec::Shape{8, 2, 300}));
  const auto off = a.meta.at("segment_offsets").get<std::vector<std::size_t>>();
  const std::size_t len = a.record->length();
  EXPECT_EQ(a.pairs.x[300 + 5], a.record->abdominal[1 * len + off[0] + 5]);
  EXPECT_EQ(data::contiguous_offsets(6000, 2000), (std::vector<std::size_t>{0, 2000, 4000}));
}

TEST(Gather, SelectsRows) {
  const Tensor t({3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(data::gather(t, {2, 0}), Tensor({2, 2}, {5, 6, 1, 2}));
  EXPECT_THROW(data::gather(t, {3}), icarec::ShapeError);
}

TEST(CsvRoundTrip, TwoDimensionalBitExact) {
  data::MixingSpec spec;
  spec.kind = data::MixingKind::softplus_nonlinear;
  const auto d = data::make_2d_dataset(500, 21, spec);
  const auto p = scratch("nl.csv");
  data::write_dataset(d, p);
  const auto back = data::read_dataset(p);
  EXPECT_EQ(back.pairs.x, d.pairs.x);
  EXPECT_EQ(*back.pairs.t, *d.pairs.t);
  EXPECT_EQ(*back.s, *d.s);
  EXPECT_EQ(back.meta, d.meta);
  EXPECT_EQ(icarec::io::read_file(p).substr(0, 16), "x_0,x_1,t_0,s_0\n");
}

TEST(CsvRoundTrip, ClassConditions) {
  data::PairedDataset d;
  d.pairs.x = Tensor({3, 1}, {0.1, 0.2, 1e-300});
  d.pairs.t_class = {0, 2, 1};
  d.pairs.num_classes = 3;
  const auto back = data::dataset_from_csv(data::dataset_to_csv(d), {}, "mem");
  EXPECT_EQ(back.pairs.x, d.pairs.x);
  EXPECT_EQ(back.pairs.t_class, d.pairs.t_class);
  EXPECT_EQ(back.pairs.num_classes, 3u);
}

TEST(CsvRoundTrip, FecgRecord) {
  const auto d = data::gen_synthetic_fecg(small_fecg(), 2);
  const auto p = scratch("fecg.csv");
  data::write_dataset(d, p);
  const auto back = data::read_dataset(p);
  ASSERT_TRUE(back.record);
  EXPECT_EQ(back.record->abdominal, d.record->abdominal);
  EXPECT_EQ(back.record->thorax, d.record->thorax);
  EXPECT_EQ(back.record->fetal, d.record->fetal);
  EXPECT_EQ(back.record->tau_f, 270u);
  EXPECT_EQ(back.pairs.x, d.pairs.x);
  EXPECT_EQ(*back.s, *d.s);
}

TEST(CsvRoundTrip, MalformedRejectedWithOffset) {
  try {
    data::dataset_from_csv("x_0,t_0\n1,2\n3,abc\n", {}, "mem");
    FAIL();
  } catch (const icarec::ParseError& e) {
    EXPECT_EQ(e.byte_offset(), 14u);
  }
  EXPECT_THROW(data::dataset_from_csv("x_0,t_0\n1\n", {}, "mem"), icarec::ParseError);
  EXPECT_THROW(data::dataset_from_csv("x_0,q\n1,2\n", {}, "mem"), icarec::ParseError);
  EXPECT_THROW(data::read_dataset(scratch("missing.csv")), icarec::io::FileNotFound);
}
