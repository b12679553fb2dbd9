#pragma once

// Adversarial training loop. Every batch drives one discriminator step; every
// beta-th discriminator step within an epoch is followed by one autoencoder
// step on the same batch. The step counter restarts each epoch.
//
// Metrics CSV columns, one row per eval point:
//   epoch,disc_steps,ae_steps,recon,ind_disc,disc_score,spearman_code_s,hsic_code_t
// recon and ind_disc are means over the epoch's AE and discriminator steps;
// disc_score is r^2 (regression), accuracy (domain confusion, contrastive)
// or the scale-invariant distance. Absent values are empty cells.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/adam.hpp"
#include "icarec/autodiff.hpp"
#include "icarec/checkpoint.hpp"
#include "icarec/dataset_io.hpp"
#include "icarec/infometrics.hpp"
#include "icarec/io.hpp"
#include "icarec/nn.hpp"
#include "icarec/objectives.hpp"
#include "icarec/rng.hpp"

namespace icarec::train {

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t beta = 5;
  double lr_ae = 1e-4;
  double lr_disc = 1e-4;
  double disc_weight_decay = 1e-4;
  obj::ObjectiveConfig objective{obj::ReconKind::l1, obj::IndKind::regression, 0.01};
  nn::NetSpec encoder, decoder, discriminator;
  std::size_t eval_every = 1;
  /// 0 writes checkpoints only at the end of training.
  std::size_t checkpoint_every = 0;
  std::size_t metrics_max_samples = 256;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (c.batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
  if (c.beta < 1) throw ConfigError("train: beta must be at least 1");
  if (!(c.lr_ae > 0.0) || !(c.lr_disc > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (!(c.disc_weight_decay >= 0.0)) throw ConfigError("train: disc_weight_decay must be nonnegative");
  if (!(c.objective.lambda >= 0.0)) throw ConfigError("train: lambda must be nonnegative");
  if (c.eval_every < 1) throw ConfigError("train: eval_every must be at least 1");
  if (nn::validate(c.encoder).condition) throw ConfigError("train: the encoder takes no condition");
  if (!nn::validate(c.decoder).condition) throw ConfigError("train: the decoder needs a concat_condition layer");
}

/// Networks with their optimizer states.
struct Nets {
  nn::Net encoder, decoder, discriminator;
  nn::AdamState adam_encoder, adam_decoder, adam_discriminator;
};

inline Nets make_nets(const TrainConfig& c) {
  Nets n;
  n.encoder = nn::build_net(c.encoder, derive_seed(c.seed, 1));
  n.decoder = nn::build_net(c.decoder, derive_seed(c.seed, 2));
  n.discriminator = nn::build_net(c.discriminator, derive_seed(c.seed, 3));
  const nn::AdamConfig ae{c.lr_ae, 0.9, 0.999, 1e-8, 0.0};
  const nn::AdamConfig disc{c.lr_disc, 0.9, 0.999, 1e-8, c.disc_weight_decay};
  n.adam_encoder = nn::make_adam(n.encoder, ae);
  n.adam_decoder = nn::make_adam(n.decoder, ae);
  n.adam_discriminator = nn::make_adam(n.discriminator, disc);
  return n;
}

inline void set_mode(Nets& n, nn::Mode m) {
  n.encoder.mode = m;
  n.decoder.mode = m;
  n.discriminator.mode = m;
}

/// Seeded shuffle per epoch; a short final batch is dropped, so every batch
/// has exactly b rows.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t b, std::uint64_t seed,
                                                          std::size_t epoch) {
  if (n == 0) throw ConfigError("make_batches: empty dataset");
  if (b == 0) throw ConfigError("make_batches: batch size must be positive");
  Rng rng(derive_seed(seed, 1000 + epoch));
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += b) {
    std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(i),
                                   perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + b)));
    if (batch.size() == b) out.push_back(std::move(batch));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective plumbing.

/// A batch as graph inputs.
struct Batch {
  ad::Node x;
  std::optional<ad::Node> t;
  std::vector<std::size_t> t_class;

  nn::Condition condition() const {
    return t ? nn::Condition::numeric(*t) : nn::Condition::symbolic(t_class);
  }
};

inline Batch make_batch(const data::Pairs& p, const std::vector<std::size_t>& idx) {
  const data::Pairs g = data::gather(p, idx);
  Batch b{ad::constant(g.x), std::nullopt, g.t_class};
  if (g.t) b.t = ad::constant(*g.t);
  return b;
}

struct IndResult {
  ad::Node value;
  std::vector<ad::Node> disc_params;
  nn::NetOutput disc_out;
};

/// The independence term for a code batch. Discriminator params are graph
/// leaves when `track_disc` holds, constants otherwise.
inline IndResult independence(const TrainConfig& cfg, const nn::Net& disc, const ad::Node& code, const Batch& batch,
                              bool track_disc, std::uint64_t step_seed) {
  IndResult r;
  switch (cfg.objective.ind) {
    case obj::IndKind::regression: {
      if (!batch.t) throw ConfigError("regression independence needs a numeric condition");
      r.disc_out = nn::forward(disc, code, nullptr, track_disc);
      r.value = obj::ind_regression(r.disc_out.output, *batch.t);
      break;
    }
    case obj::IndKind::domain_confusion: {
      if (batch.t_class.empty()) throw ConfigError("domain_confusion independence needs class conditions");
      r.disc_out = nn::forward(disc, code, nullptr, track_disc);
      r.value = obj::ind_domain_confusion(r.disc_out.output, batch.t_class);
      break;
    }
    case obj::IndKind::contrastive: {
      const std::size_t n = code.shape()[0];
      Rng rng(step_seed);
      const auto perm = obj::derangement(n, rng);
      const ad::Node codes2 = ad::concat({code, code}, 0);
      nn::Condition cond;
      if (batch.t) {
        std::vector<std::size_t> rows(perm.begin(), perm.end());
        const ad::Node fake = ad::constant(data::gather(batch.t->value(), rows));
        cond = nn::Condition::numeric(ad::concat({*batch.t, fake}, 0));
      } else {
        std::vector<std::size_t> cls = batch.t_class;
        for (std::size_t i = 0; i < n; ++i) cls.push_back(batch.t_class[perm[i]]);
        cond = nn::Condition::symbolic(std::move(cls));
      }
      std::vector<int> labels(2 * n, 0);
      std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n), 1);
      r.disc_out = nn::forward(disc, codes2, &cond, track_disc);
      r.value = obj::ind_contrastive(r.disc_out.output, labels);
      break;
    }
    case obj::IndKind::scale_invariant: {
      if (!batch.t) throw ConfigError("scale_invariant independence needs a numeric condition");
      r.disc_out = nn::forward(disc, *batch.t, nullptr, track_disc);
      r.value = obj::ind_scale_invariant(code, r.disc_out.output);
      break;
    }
  }
  r.disc_params = r.disc_out.params;
  return r;
}

inline std::vector<Tensor> grads_for(const ad::Gradients& g, const std::vector<ad::Node>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(g.contains(p) ? g.of(p) : Tensor::zeros(p.shape()));
  return out;
}

/// One discriminator step: the code enters as a constant, so only the
/// discriminator is updated. Returns the independence value.
inline double train_step_disc(const TrainConfig& cfg, Nets& nets, const Batch& batch, std::uint64_t step_seed) {
  const ad::Node code = ad::detach(nn::apply(nets.encoder, batch.x));
  const IndResult ind = independence(cfg, nets.discriminator, code, batch, true, step_seed);
  const ad::Node loss = obj::loss_disc(ind.value);
  const auto g = ad::backward(loss);
  nn::adam_step(nets.adam_discriminator, nets.discriminator, grads_for(g, ind.disc_params));
  nn::commit_buffers(nets.discriminator, ind.disc_out);
  return loss.value().item();
}

struct AeStep {
  double recon = 0, ind = 0;
};

/// One autoencoder step on recon - lambda * ind with the discriminator held
/// constant.
inline AeStep train_step_ae(const TrainConfig& cfg, Nets& nets, const Batch& batch, std::uint64_t step_seed) {
  const nn::NetOutput enc = nn::forward(nets.encoder, batch.x);
  const nn::Condition cond = batch.condition();
  const nn::NetOutput dec = nn::forward(nets.decoder, enc.output, &cond);
  const ad::Node recon = obj::recon(cfg.objective.recon, dec.output, batch.x);
  const IndResult ind = independence(cfg, nets.discriminator, enc.output, batch, false, step_seed);
  const ad::Node loss = obj::loss_ae(recon, ind.value, cfg.objective.lambda);
  const auto g = ad::backward(loss);
  const auto ge = grads_for(g, enc.params);
  const auto gd = grads_for(g, dec.params);
  nn::adam_step(nets.adam_encoder, nets.encoder, ge);
  nn::adam_step(nets.adam_decoder, nets.decoder, gd);
  nn::commit_buffers(nets.encoder, enc);
  nn::commit_buffers(nets.decoder, dec);
  return {recon.value().item(), ind.value.value().item()};
}

// ---------------------------------------------------------------------------
// Inference.

inline constexpr std::size_t kInferenceChunk = 256;

/// Runs `fn` over row chunks and stacks the outputs along axis 0.
template <class Fn>
Tensor chunked(std::size_t n, Fn&& fn) {
  std::vector<double> out;
  Shape shape;
  for (std::size_t i = 0; i < n; i += kInferenceChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t k = i; k < std::min(n, i + kInferenceChunk); ++k) idx.push_back(k);
    const Tensor part = fn(idx);
    if (shape.empty()) shape = part.shape();
    out.insert(out.end(), part.values().begin(), part.values().end());
  }
  shape[0] = n;
  return Tensor(std::move(shape), std::move(out));
}

/// Codes E(x) per sample; the encoder must be in eval mode.
inline Tensor encode(const nn::Net& encoder, const Tensor& x) {
  if (encoder.mode != nn::Mode::eval) throw ConfigError("encode: encoder must be in eval mode");
  return chunked(x.dim(0), [&](const std::vector<std::size_t>& idx) {
    return nn::apply(encoder, ad::constant(data::gather(x, idx))).value();
  });
}

inline Tensor encode_dataset(const nn::Net& encoder, const data::Pairs& p) { return encode(encoder, p.x); }

/// D(E(x), t_new); t_new must match the decoder's condition type.
inline Tensor synthesize(const nn::Net& encoder, const nn::Net& decoder, const Tensor& x, const data::Pairs& t_new) {
  if (decoder.mode != nn::Mode::eval) throw ConfigError("synthesize: decoder must be in eval mode");
  const auto cc = nn::validate(decoder.spec).condition;
  if (!cc) throw ConfigError("synthesize: decoder takes no condition");
  const bool symbolic = cc->classes > 0;
  if (symbolic != t_new.symbolic() || (!symbolic && !t_new.t)) {
    throw ConfigError("synthesize: condition type does not match the decoder");
  }
  const std::size_t rows = symbolic ? t_new.t_class.size() : t_new.t->dim(0);
  if (rows != x.dim(0)) throw ShapeError("synthesize: one condition per sample required");
  const Tensor codes = encode(encoder, x);
  return chunked(x.dim(0), [&](const std::vector<std::size_t>& idx) {
    nn::Condition cond;
    if (symbolic) {
      std::vector<std::size_t> cls;
      for (std::size_t i : idx) cls.push_back(t_new.t_class[i]);
      cond = nn::Condition::symbolic(std::move(cls));
    } else {
      cond = nn::Condition::numeric(ad::constant(data::gather(*t_new.t, idx)));
    }
    return nn::apply(decoder, ad::constant(data::gather(codes, idx)), &cond).value();
  });
}

inline Tensor reconstruct(const nn::Net& encoder, const nn::Net& decoder, const data::Pairs& p) {
  return synthesize(encoder, decoder, p.x, p);
}

// ---------------------------------------------------------------------------
// Probe: a fresh discriminator trained on frozen codes to predict t.

struct ProbeConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Trains a fresh copy of `spec` to predict numeric t (max r^2) or class
/// t (min cross-entropy) from codes, and returns its held-out r^2 or
/// accuracy.
inline double probe_score(const nn::NetSpec& spec, const Tensor& train_codes, const data::Pairs& train_t,
                          const Tensor& eval_codes, const data::Pairs& eval_t, const ProbeConfig& pc) {
  nn::Net probe = nn::build_net(spec, derive_seed(pc.seed, 7));
  nn::AdamState adam = nn::make_adam(probe, {pc.lr, 0.9, 0.999, 1e-8, 0.0});
  const std::size_t n = train_codes.dim(0);
  for (std::size_t e = 0; e < pc.epochs; ++e) {
    for (const auto& idx : make_batches(n, pc.batch_size, derive_seed(pc.seed, 8), e)) {
      const ad::Node code = ad::constant(data::gather(train_codes, idx));
      const nn::NetOutput out = nn::forward(probe, code);
      ad::Node loss;
      if (train_t.symbolic()) {
        std::vector<std::size_t> cls;
        for (std::size_t i : idx) cls.push_back(train_t.t_class[i]);
        loss = obj::ind_domain_confusion(out.output, cls);
      } else {
        loss = obj::ind_regression(out.output, ad::constant(data::gather(*train_t.t, idx)));
      }
      const auto g = ad::backward(loss);
      nn::adam_step(adam, probe, grads_for(g, out.params));
      nn::commit_buffers(probe, out);
    }
  }
  probe.mode = nn::Mode::eval;
  const Tensor pred = chunked(eval_codes.dim(0), [&](const std::vector<std::size_t>& idx) {
    return nn::apply(probe, ad::constant(data::gather(eval_codes, idx))).value();
  });
  if (eval_t.symbolic()) {
    const std::size_t k = pred.dim(1);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.dim(0); ++i) {
      std::size_t arg = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (pred[i * k + c] > pred[i * k + arg]) arg = c;
      hit += arg == eval_t.t_class[i];
    }
    return static_cast<double>(hit) / static_cast<double>(pred.dim(0));
  }
  return obj::squared_correlation(ad::constant(pred), ad::constant(*eval_t.t)).value().item();
}

// ---------------------------------------------------------------------------
// Full training run.

struct EpochRecord {
  std::size_t epoch = 0, disc_steps = 0, ae_steps = 0;
  double recon = NAN, ind_disc = NAN;
  std::optional<double> disc_score, spearman_code_s, hsic_code_t;
};

struct TrainReport {
  std::vector<EpochRecord> records;
  std::size_t disc_steps = 0, ae_steps = 0;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    for (const auto& r : records) {
      rows.push_back({{"epoch", r.epoch},
                      {"disc_steps", r.disc_steps},
                      {"ae_steps", r.ae_steps},
                      {"recon", num(r.recon)},
                      {"ind_disc", num(r.ind_disc)},
                      {"disc_score", opt(r.disc_score)},
                      {"spearman_code_s", opt(r.spearman_code_s)},
                      {"hsic_code_t", opt(r.hsic_code_t)}});
    }
    return {{"records", rows}, {"disc_steps", disc_steps}, {"ae_steps", ae_steps}};
  }
};

inline std::string metrics_csv(const TrainReport& rep) {
  std::ostringstream os;
  os << "epoch,disc_steps,ae_steps,recon,ind_disc,disc_score,spearman_code_s,hsic_code_t\n";
  auto cell = [](double v) { return std::isfinite(v) ? data::format_double(v) : std::string(); };
  auto opt = [](const std::optional<double>& v) { return v ? data::format_double(*v) : std::string(); };
  for (const auto& r : rep.records) {
    os << r.epoch << ',' << r.disc_steps << ',' << r.ae_steps << ',' << cell(r.recon) << ',' << cell(r.ind_disc) << ','
       << opt(r.disc_score) << ',' << opt(r.spearman_code_s) << ',' << opt(r.hsic_code_t) << '\n';
  }
  return os.str();
}

/// Writes encoder/decoder/discriminator checkpoints into `dir`.
inline void save_nets(const Nets& n, const std::filesystem::path& dir, const nlohmann::json& provenance = nullptr) {
  nn::save_checkpoint(n.encoder, n.adam_encoder, dir / "encoder.json", provenance);
  nn::save_checkpoint(n.decoder, n.adam_decoder, dir / "decoder.json", provenance);
  nn::save_checkpoint(n.discriminator, n.adam_discriminator, dir / "discriminator.json", provenance);
}

inline Nets load_nets(const std::filesystem::path& dir) {
  Nets n;
  std::tie(n.encoder, n.adam_encoder) = nn::load_checkpoint(dir / "encoder.json");
  std::tie(n.decoder, n.adam_decoder) = nn::load_checkpoint(dir / "decoder.json");
  std::tie(n.discriminator, n.adam_discriminator) = nn::load_checkpoint(dir / "discriminator.json");
  return n;
}

namespace detail {

inline std::vector<double> column0(const Tensor& t) {
  const std::size_t w = t.numel() / t.dim(0);
  std::vector<double> v(t.dim(0));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t[i * w];
  return v;
}

inline EpochRecord evaluate_epoch(const TrainConfig& cfg, Nets& nets, const data::Pairs& p,
                                  const std::optional<Tensor>& s) {
  EpochRecord r;
  std::vector<std::size_t> idx;
  const std::size_t n = p.size(), m = std::min(n, cfg.metrics_max_samples);
  for (std::size_t i = 0; i < m; ++i) idx.push_back(i * n / m);
  const data::Pairs sub = data::gather(p, idx);
  set_mode(nets, nn::Mode::eval);
  const Tensor codes = encode(nets.encoder, sub.x);
  const Batch b{ad::constant(codes), sub.t ? std::optional<ad::Node>(ad::constant(*sub.t)) : std::nullopt, sub.t_class};
  try {
    const IndResult ind = independence(cfg, nets.discriminator, b.x, b, false, derive_seed(cfg.seed, 99));
    const Tensor& out = ind.disc_out.output.value();
    switch (cfg.objective.ind) {
      case obj::IndKind::regression: r.disc_score = -ind.value.value().item(); break;
      case obj::IndKind::scale_invariant: r.disc_score = ind.value.value().item(); break;
      case obj::IndKind::domain_confusion: {
        const std::size_t k = out.dim(1);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < m; ++i) {
          std::size_t arg = 0;
          for (std::size_t c = 1; c < k; ++c)
            if (out[i * k + c] > out[i * k + arg]) arg = c;
          hit += arg == sub.t_class[i];
        }
        r.disc_score = static_cast<double>(hit) / static_cast<double>(m);
        break;
      }
      case obj::IndKind::contrastive: {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < 2 * m; ++i) hit += (out[i] > 0.0) == (i < m);
        r.disc_score = static_cast<double>(hit) / static_cast<double>(2 * m);
        break;
      }
    }
  } catch (const DegenerateBatchError&) {
  }
  const bool flat = codes.rank() == 2;
  if (flat && codes.dim(1) == 1 && s && s->numel() == s->dim(0)) {
    try {
      r.spearman_code_s = info::spearman(column0(codes), column0(data::gather(*s, idx)));
    } catch (const DegenerateBatchError&) {
    }
  }
  if (flat && sub.t && sub.t->rank() == 2 && m >= 8) {
    try {
      r.hsic_code_t = info::hsic(codes, *sub.t);
    } catch (const DegenerateBatchError&) {
    }
  }
  set_mode(nets, nn::Mode::train);
  return r;
}

}  // namespace detail

struct TrainResult {
  Nets nets;
  TrainReport report;
};

/// Runs the full schedule. With `out_dir` set, writes metrics.csv and
/// checkpoints (checkpoints/epoch-N/ and final/). Non-finite values raise
/// TrainingDiverged carrying the last checkpoint directory ("" if none).
/// `provenance` is embedded in every checkpoint written.
inline TrainResult train(const TrainConfig& cfg, const data::Pairs& pairs, const std::optional<Tensor>& s = std::nullopt,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                         const nlohmann::json& provenance = nullptr) {
  validate(cfg);
  if (pairs.size() < 2) throw ConfigError("train: need at least 2 samples");
  TrainResult res{make_nets(cfg), {}};
  Nets& nets = res.nets;
  std::string last_checkpoint;
  std::size_t disc_total = 0, ae_total = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(pairs.size(), cfg.batch_size, cfg.seed, epoch);
    double recon_sum = 0, ind_sum = 0;
    std::size_t recon_n = 0, ind_n = 0, counter = 0;
    try {
      for (const auto& idx : batches) {
        const Batch batch = make_batch(pairs, idx);
        ind_sum += train_step_disc(cfg, nets, batch, derive_seed(cfg.seed, 2'000'000 + disc_total));
        ++ind_n;
        ++disc_total;
        if (++counter % cfg.beta == 0) {
          const AeStep st = train_step_ae(cfg, nets, batch, derive_seed(cfg.seed, 3'000'000 + ae_total));
          recon_sum += st.recon;
          ++recon_n;
          ++ae_total;
        }
      }
    } catch (const NonFiniteError& e) {
      throw TrainingDiverged("training diverged in epoch " + std::to_string(epoch + 1) + ": " + e.what(), last_checkpoint);
    }
    const std::size_t ep = epoch + 1;
    if (ep % cfg.eval_every == 0 || ep == cfg.epochs) {
      EpochRecord rec = detail::evaluate_epoch(cfg, nets, pairs, s);
      rec.epoch = ep;
      rec.disc_steps = disc_total;
      rec.ae_steps = ae_total;
      rec.recon = recon_n ? recon_sum / static_cast<double>(recon_n) : NAN;
      rec.ind_disc = ind_n ? ind_sum / static_cast<double>(ind_n) : NAN;
      res.report.records.push_back(rec);
    }
    if (out_dir && cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0 && ep != cfg.epochs) {
      const auto dir = *out_dir / "checkpoints" / ("epoch-" + std::to_string(ep));
      save_nets(nets, dir, provenance);
      last_checkpoint = dir.string();
    }
  }
  res.report.disc_steps = disc_total;
  res.report.ae_steps = ae_total;
  set_mode(nets, nn::Mode::eval);
  if (out_dir) {
    save_nets(nets, *out_dir / "final", provenance);
    io::write_file_atomic(*out_dir / "metrics.csv", metrics_csv(res.report));
  }
  return res;
}

// ---------------------------------------------------------------------------
// JSON form of TrainConfig.

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"beta", c.beta},
          {"lr_ae", c.lr_ae},
          {"lr_disc", c.lr_disc},
          {"disc_weight_decay", c.disc_weight_decay},
          {"recon", obj::to_string(c.objective.recon)},
          {"ind", obj::to_string(c.objective.ind)},
          {"lambda", c.objective.lambda},
          {"eval_every", c.eval_every},
          {"checkpoint_every", c.checkpoint_every},
          {"metrics_max_samples", c.metrics_max_samples},
          {"encoder", nn::spec_to_json(c.encoder)},
          {"decoder", nn::spec_to_json(c.decoder)},
          {"discriminator", nn::spec_to_json(c.discriminator)}};
}

}  // namespace icarec::train
