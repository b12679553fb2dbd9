#pragma once

// Experiment configs: strict JSON (unknown keys rejected anywhere) resolved
// into datasets, net specs and a TrainConfig, plus the run/evaluate drivers
// shared by the CLI and the acceptance suite.
//
//   {"name": ..., "seed": 0, "output": "runs/x",
//    "dataset": {"generator": "2d-linear" | "2d-nonlinear" | "angles-toy" | "fecg" | "csv", ...},
//    "model":   {"kind": "mlp" | "conv" | "explicit", ...},
//    "train":   {"epochs": ..., "lambda": ..., ...},
//    "eval":    {"hsic_permutations": ..., ...}}

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icarec/dataset_io.hpp"
#include "icarec/datagen.hpp"
#include "icarec/eval.hpp"
#include "icarec/io.hpp"
#include "icarec/nn.hpp"
#include "icarec/trainer.hpp"

namespace icarec::exp {

using nlohmann::json;

/// Strict view of one JSON object: every key must be read before finish().
class Section {
 public:
  Section(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    return j_.contains(key) ? convert<T>(key) : fallback;
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where(key) + ": missing required key");
    return convert<T>(key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where(key) + ": missing required key");
    return j_.at(key);
  }

  Section sub(const std::string& key) { return Section(raw(key), where(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
    }
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

 private:
  template <class T>
  T convert(const std::string& key) const {
    const json& v = j_.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_unsigned_v<T>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = true;
    }
    if (!ok) throw ConfigError(where(key) + ": wrong value type (" + std::string(v.type_name()) + ")");
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  json j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Config sections.

struct DatasetSection {
  std::string generator = "2d-linear";
  std::size_t n = 5000;
  std::optional<std::uint64_t> seed;
  data::Matrix2 a = data::kDefaultMixing;
  data::AnglesSpec angles;
  data::FecgConfig fecg;
  std::filesystem::path path;
  /// Extra samples drawn from the same generator for held-out metrics.
  std::size_t holdout = 1000;
};

struct ModelSection {
  std::string kind = "mlp";
  std::size_t hidden = 3, units = 64, code_dim = 1, condition_embed = 4;
  nn::Activation activation = nn::Activation::softplus;
  std::optional<nn::NetSpec> encoder, decoder, discriminator;
};

struct EvalSection {
  std::size_t hsic_max_samples = 512;
  std::size_t hsic_permutations = 200;
  std::size_t mi_bins = 16;
  std::vector<std::size_t> tau_f, tau_m;
  std::optional<std::size_t> segment_length;
  std::size_t probe_epochs = 10, probe_batch_size = 32;
  double probe_lr = 1e-3;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  DatasetSection dataset;
  std::optional<ModelSection> model;
  std::optional<train::TrainConfig> train;
  EvalSection eval;
  /// Present sections, for subcommand completeness checks.
  std::set<std::string> sections;

  std::uint64_t dataset_seed() const { return dataset.seed.value_or(seed); }
};

inline const std::vector<std::string>& generators() {
  static const std::vector<std::string> g{"2d-linear", "2d-nonlinear", "angles-toy", "fecg", "csv"};
  return g;
}

namespace detail {

inline data::Matrix2 matrix_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || !j[1].is_array() || j[0].size() != 2 || j[1].size() != 2) {
    throw ConfigError(where + ": expected a 2x2 array");
  }
  data::Matrix2 a{};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(where + ": entries must be numbers");
      a[r][c] = j[r][c].get<double>();
    }
  return a;
}

inline DatasetSection parse_dataset(Section s, const std::filesystem::path& base) {
  DatasetSection d;
  d.generator = s.require<std::string>("generator");
  if (std::find(generators().begin(), generators().end(), d.generator) == generators().end()) {
    throw ConfigError(s.where("generator") + ": unknown generator '" + d.generator + "'");
  }
  if (s.has("seed")) d.seed = s.get<std::uint64_t>("seed", 0);
  d.holdout = s.get<std::size_t>("holdout", d.holdout);
  if (d.generator == "2d-linear" || d.generator == "2d-nonlinear") {
    d.n = s.get<std::size_t>("n", d.n);
    if (s.has("A")) d.a = matrix_from(s.raw("A"), s.where("A"));
    data::check_invertible(d.a);
  } else if (d.generator == "angles-toy") {
    d.n = s.get<std::size_t>("n", d.n);
    d.angles.embed_dim = s.get<std::size_t>("embed_dim", d.angles.embed_dim);
    d.angles.identity = s.get<bool>("identity", d.angles.identity);
    d.angles.embedding_seed = s.get<std::uint64_t>("embedding_seed", d.angles.embedding_seed);
  } else if (d.generator == "fecg") {
    auto& f = d.fecg;
    f.n_a = s.get<std::size_t>("n_a", f.n_a);
    f.n_t = s.get<std::size_t>("n_t", f.n_t);
    f.n_T = s.get<std::size_t>("n_T", f.n_T);
    f.tau_m = s.get<std::size_t>("tau_m", f.tau_m);
    f.tau_f = s.get<std::size_t>("tau_f", f.tau_f);
    f.alpha = s.get<double>("alpha", f.alpha);
    f.sigma = s.get<double>("sigma", f.sigma);
    f.record_length = s.get<std::size_t>("record_length", f.record_length);
    f.train_segments = s.get<std::size_t>("train_segments", f.train_segments);
    f.train_length = s.get<std::size_t>("train_length", f.train_length);
    data::validate(f);
  } else {
    const auto p = std::filesystem::path(s.require<std::string>("path"));
    d.path = p.is_absolute() ? p : base / p;
    if (!std::filesystem::exists(d.path)) throw io::FileNotFound("dataset.path: '" + d.path.string() + "' does not exist");
  }
  if (d.n == 0) throw ConfigError(s.where("n") + ": must be positive");
  s.finish();
  return d;
}

inline ModelSection parse_model(Section s) {
  ModelSection m;
  m.kind = s.get<std::string>("kind", m.kind);
  if (m.kind == "explicit") {
    try {
      m.encoder = nn::spec_from_json(s.raw("encoder"));
      m.decoder = nn::spec_from_json(s.raw("decoder"));
      m.discriminator = nn::spec_from_json(s.raw("discriminator"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  } else if (m.kind == "mlp" || m.kind == "conv") {
    m.code_dim = s.get<std::size_t>("code_dim", m.code_dim);
    if (m.code_dim == 0) throw ConfigError(s.where("code_dim") + ": must be positive");
    if (m.kind == "mlp") {
      m.hidden = s.get<std::size_t>("hidden", m.hidden);
      m.units = s.get<std::size_t>("units", m.units);
      m.condition_embed = s.get<std::size_t>("condition_embed", m.condition_embed);
      m.activation = nn::activation_from_string(s.get<std::string>("activation", nn::to_string(m.activation)));
    }
  } else {
    throw ConfigError(s.where("kind") + ": unknown model kind '" + m.kind + "' (mlp, conv or explicit)");
  }
  s.finish();
  return m;
}

inline train::TrainConfig parse_train(Section s, std::uint64_t seed) {
  train::TrainConfig c;
  c.seed = seed;
  c.epochs = s.get<std::size_t>("epochs", c.epochs);
  c.batch_size = s.get<std::size_t>("batch_size", c.batch_size);
  c.beta = s.get<std::size_t>("beta", c.beta);
  c.lr_ae = s.get<double>("lr_ae", c.lr_ae);
  c.lr_disc = s.get<double>("lr_disc", c.lr_disc);
  c.disc_weight_decay = s.get<double>("disc_weight_decay", c.disc_weight_decay);
  c.objective.lambda = s.get<double>("lambda", c.objective.lambda);
  c.objective.recon = obj::recon_from_string(s.get<std::string>("recon", obj::to_string(c.objective.recon)));
  c.objective.ind = obj::ind_from_string(s.get<std::string>("ind", obj::to_string(c.objective.ind)));
  c.eval_every = s.get<std::size_t>("eval_every", c.eval_every);
  c.checkpoint_every = s.get<std::size_t>("checkpoint_every", c.checkpoint_every);
  c.metrics_max_samples = s.get<std::size_t>("metrics_max_samples", c.metrics_max_samples);
  s.finish();
  return c;
}

inline EvalSection parse_eval(Section s) {
  EvalSection e;
  e.hsic_max_samples = s.get<std::size_t>("hsic_max_samples", e.hsic_max_samples);
  e.hsic_permutations = s.get<std::size_t>("hsic_permutations", e.hsic_permutations);
  e.mi_bins = s.get<std::size_t>("mi_bins", e.mi_bins);
  e.tau_f = s.get<std::vector<std::size_t>>("tau_f", e.tau_f);
  e.tau_m = s.get<std::vector<std::size_t>>("tau_m", e.tau_m);
  if (s.has("segment_length")) e.segment_length = s.get<std::size_t>("segment_length", 0);
  e.probe_epochs = s.get<std::size_t>("probe_epochs", e.probe_epochs);
  e.probe_batch_size = s.get<std::size_t>("probe_batch_size", e.probe_batch_size);
  e.probe_lr = s.get<double>("probe_lr", e.probe_lr);
  if (e.hsic_max_samples < 8) throw ConfigError(s.where("hsic_max_samples") + ": must be at least 8");
  if (e.mi_bins < 2) throw ConfigError(s.where("mi_bins") + ": must be at least 2");
  if (e.tau_f.size() != e.tau_m.size()) throw ConfigError(s.where("tau_f") + ": tau_f and tau_m lengths differ");
  s.finish();
  return e;
}

}  // namespace detail

/// Parses and validates; relative paths resolve against `base`.
inline ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base = ".") {
  Section s(j, "config");
  ExperimentConfig c;
  c.name = s.get<std::string>("name", "");
  c.seed = s.get<std::uint64_t>("seed", 0);
  const std::string out = s.get<std::string>("output", "");
  if (!out.empty()) c.output = out;
  c.dataset = detail::parse_dataset(s.sub("dataset"), base);
  c.sections.insert("dataset");
  if (s.has("model")) {
    c.model = detail::parse_model(s.sub("model"));
    c.sections.insert("model");
  }
  if (s.has("train")) {
    c.train = detail::parse_train(s.sub("train"), c.seed);
    c.sections.insert("train");
  }
  if (s.has("eval")) {
    c.eval = detail::parse_eval(s.sub("eval"));
    c.sections.insert("eval");
  }
  s.finish();
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(io::read_json(path), path.parent_path());
}

inline void require_sections(const ExperimentConfig& c, std::initializer_list<const char*> names, const std::string& cmd) {
  for (const char* n : names) {
    if (!c.sections.count(n)) throw ConfigError(cmd + ": config needs a '" + n + "' section");
  }
}

// ---------------------------------------------------------------------------
// Datasets.

inline constexpr std::uint64_t kHoldoutTag = 0x401d;

inline data::PairedDataset generate(const DatasetSection& d, std::size_t n, std::uint64_t seed) {
  if (d.generator == "2d-linear" || d.generator == "2d-nonlinear") {
    data::MixingSpec m;
    m.kind = d.generator == "2d-linear" ? data::MixingKind::linear : data::MixingKind::softplus_nonlinear;
    m.a = d.a;
    return data::make_2d_dataset(n, seed, m);
  }
  if (d.generator == "angles-toy") return data::gen_rotating_angles_toy(n, seed, d.angles);
  if (d.generator == "fecg") return data::gen_synthetic_fecg(d.fecg, seed);
  return data::read_dataset(d.path);
}

inline data::PairedDataset make_dataset(const ExperimentConfig& c) {
  return generate(c.dataset, c.dataset.n, c.dataset_seed());
}

/// Fresh samples from the same generator; none for fECG and CSV data.
inline std::optional<data::PairedDataset> make_holdout(const ExperimentConfig& c) {
  const auto& g = c.dataset.generator;
  if (g == "fecg" || g == "csv" || c.dataset.holdout == 0) return std::nullopt;
  return generate(c.dataset, c.dataset.holdout, derive_seed(c.dataset_seed(), kHoldoutTag));
}

// ---------------------------------------------------------------------------
// Net specs.

struct NetSpecs {
  nn::NetSpec encoder, decoder, discriminator;
};

namespace detail {

inline std::size_t width(const Tensor& t) { return t.numel() / t.dim(0); }

}  // namespace detail

/// Sizes the stock architectures to the dataset and objective.
inline NetSpecs resolve_nets(const ModelSection& m, const data::Pairs& p, obj::IndKind ind) {
  if (m.kind == "explicit") return {*m.encoder, *m.decoder, *m.discriminator};
  const bool symbolic = p.symbolic();
  if (!symbolic && !p.t) throw ConfigError("dataset has no condition");
  NetSpecs n;
  if (m.kind == "conv") {
    if (p.x.rank() != 3 || !p.t || p.t->rank() != 3) throw ConfigError("model.kind conv needs channel data (n, ch, len)");
    const std::size_t in_ch = p.x.dim(1), t_ch = p.t->dim(1), k = m.code_dim;
    n.encoder = nn::conv_encoder_spec(in_ch, k);
    n.decoder = nn::conv_decoder_spec(k, t_ch, in_ch);
    switch (ind) {
      case obj::IndKind::scale_invariant: n.discriminator = nn::conv_encoder_spec(t_ch, k, nn::Role::discriminator); break;
      case obj::IndKind::regression: n.discriminator = nn::conv_encoder_spec(k, t_ch, nn::Role::discriminator); break;
      default: throw ConfigError("model.kind conv supports the regression and scale_invariant objectives");
    }
    return n;
  }
  if (p.x.rank() != 2) throw ConfigError("model.kind mlp needs flat data (n, d)");
  const std::size_t x_dim = detail::width(p.x), k = m.code_dim;
  const std::size_t t_dim = symbolic ? 0 : detail::width(*p.t);
  const nn::ConcatCondition cond = symbolic
                                       ? nn::ConcatCondition{nn::ConditionMode::append_features, m.condition_embed, p.num_classes}
                                       : nn::ConcatCondition{nn::ConditionMode::append_features, t_dim, 0};
  n.encoder = nn::mlp_spec(nn::Role::encoder, x_dim, k, m.hidden, m.units, m.activation);
  n.decoder = nn::mlp_spec(nn::Role::decoder, k, x_dim, m.hidden, m.units, m.activation, cond);
  const auto disc = [&](std::size_t in, std::size_t out, std::optional<nn::ConcatCondition> c = std::nullopt) {
    return nn::mlp_spec(nn::Role::discriminator, in, out, m.hidden, m.units, m.activation, c);
  };
  switch (ind) {
    case obj::IndKind::regression:
      if (symbolic) throw ConfigError("the regression objective needs a numeric condition");
      n.discriminator = disc(k, t_dim);
      break;
    case obj::IndKind::domain_confusion:
      if (!symbolic) throw ConfigError("the domain_confusion objective needs class conditions");
      n.discriminator = disc(k, p.num_classes);
      break;
    case obj::IndKind::contrastive: n.discriminator = disc(k, 1, cond); break;
    case obj::IndKind::scale_invariant:
      if (symbolic) throw ConfigError("the scale_invariant objective needs a numeric condition");
      n.discriminator = disc(t_dim, k);
      break;
  }
  return n;
}

/// Resolved TrainConfig with net specs filled in.
inline train::TrainConfig resolve_train(const ExperimentConfig& c, const data::Pairs& p) {
  require_sections(c, {"model", "train"}, "train");
  train::TrainConfig t = *c.train;
  const NetSpecs n = resolve_nets(*c.model, p, t.objective.ind);
  t.encoder = n.encoder;
  t.decoder = n.decoder;
  t.discriminator = n.discriminator;
  train::validate(t);
  return t;
}

// ---------------------------------------------------------------------------
// Resolved JSON (provenance).

inline json dataset_to_json(const DatasetSection& d) {
  json j{{"generator", d.generator}, {"holdout", d.holdout}};
  if (d.seed) j["seed"] = *d.seed;
  if (d.generator == "2d-linear" || d.generator == "2d-nonlinear") {
    j["n"] = d.n;
    j["A"] = d.a;
  } else if (d.generator == "angles-toy") {
    j["n"] = d.n;
    j["embed_dim"] = d.angles.embed_dim;
    j["identity"] = d.angles.identity;
    j["embedding_seed"] = d.angles.embedding_seed;
  } else if (d.generator == "fecg") {
    j.update(data::fecg_params_json(d.fecg));
  } else {
    j["path"] = d.path.generic_string();
  }
  return j;
}

inline json eval_to_json(const EvalSection& e) {
  json j{{"hsic_max_samples", e.hsic_max_samples},
         {"hsic_permutations", e.hsic_permutations},
         {"mi_bins", e.mi_bins},
         {"tau_f", e.tau_f},
         {"tau_m", e.tau_m},
         {"probe_epochs", e.probe_epochs},
         {"probe_batch_size", e.probe_batch_size},
         {"probe_lr", e.probe_lr}};
  if (e.segment_length) j["segment_length"] = *e.segment_length;
  return j;
}

inline json model_to_json(const ModelSection& m) {
  if (m.kind == "explicit") {
    return {{"kind", m.kind},
            {"encoder", nn::spec_to_json(*m.encoder)},
            {"decoder", nn::spec_to_json(*m.decoder)},
            {"discriminator", nn::spec_to_json(*m.discriminator)}};
  }
  json j{{"kind", m.kind}, {"code_dim", m.code_dim}};
  if (m.kind == "mlp") {
    j["hidden"] = m.hidden;
    j["units"] = m.units;
    j["activation"] = nn::to_string(m.activation);
    j["condition_embed"] = m.condition_embed;
  }
  return j;
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"name", c.name}, {"seed", c.seed}, {"dataset", dataset_to_json(c.dataset)}, {"eval", eval_to_json(c.eval)}};
  if (!c.output.empty()) j["output"] = c.output.generic_string();
  if (c.model) j["model"] = model_to_json(*c.model);
  if (c.train) {
    json t = train::config_to_json(*c.train);
    for (const char* k : {"seed", "encoder", "decoder", "discriminator"}) t.erase(k);
    j["train"] = t;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation.

/// Periods and segment length for presence ratios: the eval section wins,
/// then the dataset's generator params.
struct PresenceSetup {
  std::vector<std::size_t> tau_f, tau_m;
  std::size_t segment_length = 0;

  /// Per-segment lags; a single period applies to every segment.
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> lags(std::size_t segments) const {
    if (tau_f.size() == 1) return {std::vector<std::size_t>(segments, tau_f[0]), std::vector<std::size_t>(segments, tau_m[0])};
    if (tau_f.size() != segments) {
      throw ConfigError("eval.tau_f: give one period or one per segment (" + std::to_string(segments) + ")");
    }
    return {tau_f, tau_m};
  }
};

inline std::optional<PresenceSetup> presence_setup(const data::PairedDataset& d, const EvalSection& e) {
  if (!d.record) return std::nullopt;
  PresenceSetup p;
  p.tau_f = e.tau_f.empty() ? std::vector<std::size_t>{d.record->tau_f} : e.tau_f;
  p.tau_m = e.tau_m.empty() ? std::vector<std::size_t>{d.record->tau_m} : e.tau_m;
  const json params = d.meta.value("params", json::object());
  p.segment_length = e.segment_length.value_or(params.value("n_T", std::size_t{2000}));
  if (p.segment_length == 0 || p.segment_length > d.record->length()) {
    throw ConfigError("eval.segment_length must lie in [1, record length]");
  }
  return p;
}

/// MetricsReport for an encoder on a dataset. fECG records contribute
/// presence ratios over contiguous segments; flat data contributes HSIC
/// against the condition and Spearman/MI against the source when present.
inline eval::MetricsReport evaluate(const nn::Net& encoder, const data::PairedDataset& d, const EvalSection& e,
                                    std::uint64_t seed) {
  eval::EvalInputs in;
  in.hsic_max_samples = e.hsic_max_samples;
  in.hsic_permutations = e.hsic_permutations;
  in.mi_bins = e.mi_bins;
  in.seed = seed;
  if (const auto ps = presence_setup(d, e)) {
    const auto off = data::contiguous_offsets(d.record->length(), ps->segment_length);
    const Tensor xs = data::cut_segments(d.record->abdominal, off, ps->segment_length);
    in.input_segments = eval::split_segments(xs);
    in.code_segments = eval::split_segments(train::encode(encoder, xs));
    std::tie(in.tau_f, in.tau_m) = ps->lags(off.size());
  } else if (d.pairs.x.rank() == 2) {
    in.codes = train::encode(encoder, d.pairs.x);
    if (d.pairs.t && d.pairs.t->rank() == 2) in.conditions = d.pairs.t;
    in.source = d.s;
  }
  return eval::evaluation_report(in);
}

// ---------------------------------------------------------------------------
// Training run.

struct RunResult {
  train::TrainResult trained;
  json report;
};

inline std::optional<double> last_recon(const train::TrainReport& r) {
  for (auto it = r.records.rbegin(); it != r.records.rend(); ++it)
    if (std::isfinite(it->recon)) return it->recon;
  return std::nullopt;
}

/// Trains per config; with `out` set writes metrics.csv, checkpoints,
/// config.json and report.json there. The report holds held-out metrics
/// and a freshly trained probe's score for flat data.
inline RunResult run_experiment(const ExperimentConfig& c, const std::optional<std::filesystem::path>& out) {
  require_sections(c, {"model", "train"}, "train");
  const data::PairedDataset d = make_dataset(c);
  const data::Pairs view = data::training_view(d);
  const train::TrainConfig tc = resolve_train(c, view);
  const json provenance{{"config", to_json(c)}, {"seed", c.seed}};
  RunResult r{train::train(tc, view, d.s, out, provenance), {}};
  const nn::Net& enc = r.trained.nets.encoder;

  json final_j = json::object();
  if (const auto rc = last_recon(r.trained.report)) final_j["recon"] = *rc;
  const auto holdout = make_holdout(c);
  const data::PairedDataset& eval_set = holdout ? *holdout : d;
  final_j["eval_set"] = holdout ? "holdout" : "training";
  final_j["metrics"] = evaluate(enc, eval_set, c.eval, derive_seed(c.seed, 5)).to_json();
  if (view.x.rank() == 2 && eval_set.pairs.x.rank() == 2) {
    const Tensor tr_codes = train::encode(enc, view.x), ev_codes = train::encode(enc, eval_set.pairs.x);
    const std::size_t k = detail::width(tr_codes);
    const ModelSection& m = *c.model;
    const std::size_t hidden = m.kind == "mlp" ? m.hidden : 3, units = m.kind == "mlp" ? m.units : 64;
    const std::size_t out_w = view.symbolic() ? view.num_classes : detail::width(*view.t);
    const auto spec = nn::mlp_spec(nn::Role::discriminator, k, out_w, hidden, units, nn::Activation::softplus);
    const train::ProbeConfig pc{c.eval.probe_epochs, c.eval.probe_batch_size, c.eval.probe_lr, derive_seed(c.seed, 6)};
    final_j[view.symbolic() ? "probe_accuracy" : "probe_r2"] =
        train::probe_score(spec, tr_codes, view, ev_codes, eval_set.pairs, pc);
  }
  r.report = {{"name", c.name},
              {"seed", c.seed},
              {"config", to_json(c)},
              {"train_config", train::config_to_json(tc)},
              {"dataset_meta", d.meta},
              {"train", r.trained.report.to_json()},
              {"final", final_j}};
  if (out) {
    io::write_json(*out / "config.json", to_json(c));
    io::write_json(*out / "report.json", r.report);
  }
  return r;
}

}  // namespace icarec::exp
