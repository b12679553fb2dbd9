// icarec command-line tool.
//
// Exit codes:
//   0  success
//   1  missing input file
//   2  invalid config, schema violation or bad command line
//   3  malformed input file (CSV/JSON parse error)
//   4  non-finite values during training or filtering
//   5  any other failure
// Failures print one JSON line to stderr:
//   {"error":"<kind>","exit_code":<n>,"message":"..."}

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "icarec/icarec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icarec;

namespace {

enum Exit { kOk = 0, kMissingFile = 1, kConfig = 2, kParse = 3, kNonFinite = 4, kOther = 5 };

int fail(const char* kind, int code, const std::string& message) {
  std::cerr << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << '\n';
  return code;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// gen

int cmd_gen(const fs::path& config, const fs::path& out) {
  const auto cfg = exp::load_experiment(config);
  data::PairedDataset d = exp::make_dataset(cfg);
  d.meta["config"] = exp::to_json(cfg);
  data::write_dataset(d, out);
  print_json({{"csv", out.generic_string()}, {"meta", data::meta_path(out).generic_string()}, {"rows", d.record ? d.record->length() : d.pairs.size()}});
  return kOk;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const fs::path& config, const std::string& out_flag) {
  const auto cfg = exp::load_experiment(config);
  fs::path out = out_flag.empty() ? cfg.output : fs::path(out_flag);
  if (out.empty()) throw ConfigError("train: no output directory (pass --out or set 'output')");
  const auto run = exp::run_experiment(cfg, out);
  print_json({{"out", out.generic_string()}, {"final", run.report.at("final")}});
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / "final" / "encoder.json")) return p / "final";
  if (fs::exists(p / "encoder.json")) return p;
  throw io::FileNotFound("no encoder.json under '" + p.string() + "'");
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_path, const fs::path& out, const std::string& config,
             const std::string& coloring_out, const std::string& svg_out) {
  const fs::path dir = checkpoint_dir(checkpoint);
  const json enc_json = io::read_json(dir / "encoder.json");
  auto [encoder, adam] = nn::checkpoint_from_json(enc_json);
  encoder.mode = nn::Mode::eval;

  json provenance_config = nullptr;
  std::uint64_t seed = 0;
  exp::EvalSection ev;
  if (!config.empty()) {
    const auto cfg = exp::load_experiment(config);
    ev = cfg.eval;
    seed = cfg.seed;
    provenance_config = exp::to_json(cfg);
  } else if (enc_json.contains("provenance")) {
    const json& p = enc_json.at("provenance");
    provenance_config = p.at("config");
    seed = p.at("seed").get<std::uint64_t>();
    ev = exp::detail::parse_eval(exp::Section(provenance_config.at("eval"), "checkpoint.provenance.config.eval"));
  }

  const data::PairedDataset d = data::read_dataset(data_path);
  const auto metrics = exp::evaluate(encoder, d, ev, derive_seed(seed, 5));
  json report{{"checkpoint", dir.generic_string()},
              {"data", data_path.generic_string()},
              {"seed", seed},
              {"config", provenance_config},
              {"eval", exp::eval_to_json(ev)},
              {"metrics", metrics.to_json()}};

  if (!coloring_out.empty() || !svg_out.empty()) {
    const auto ps = exp::presence_setup(d, ev);
    if (!ps) throw ConfigError("eval: coloring exports need an fECG record dataset");
    const auto& rec = *d.record;
    const Tensor code = train::encode(encoder, rec.abdominal.reshaped({1, rec.abdominal.dim(0), rec.length()}));
    const std::size_t k = code.dim(1), len = code.dim(2);
    std::vector<double> samples(len * k);
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < k; ++c) samples[i * k + c] = code[c * len + i];
    const auto table = eval::pca_coloring(samples, len, k, ps->tau_f[0], ps->tau_m[0]);
    if (!coloring_out.empty()) {
      io::write_file_atomic(coloring_out, eval::coloring_to_csv(table));
      report["coloring_csv"] = fs::path(coloring_out).generic_string();
    }
    if (!svg_out.empty()) {
      std::vector<double> x, y;
      std::vector<std::size_t> cls;
      for (std::size_t i = 0; i < table.pcs.size(); ++i) {
        x.push_back(table.pcs[i][0]);
        y.push_back(table.pcs[i][1]);
        cls.push_back(table.color_f[i] * 16 / ps->tau_f[0]);
      }
      svg::ScatterOptions opt;
      opt.title = "code PCA colored by fetal phase";
      io::write_file_atomic(svg_out, svg::scatter(x, y, cls, opt));
      report["svg"] = fs::path(svg_out).generic_string();
    }
  }
  io::write_json(out, report);
  print_json(report.at("metrics"));
  return kOk;
}

// ---------------------------------------------------------------------------
// lemma

int cmd_lemma(const fs::path& system, const std::string& out_flag) {
  const auto sys = info::load_system(system);
  const auto rep = info::lemma_check(sys);
  const json j{{"system", system.generic_string()}, {"definition", info::system_to_json(sys)}, {"report", rep.to_json()}};
  const fs::path out = out_flag.empty() ? fs::path(system.stem().string() + ".report.json") : fs::path(out_flag);
  io::write_json(out, j);
  print_json(j.at("report"));
  return kOk;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineConfig {
  baselines::AdaptiveFilterConfig filter;
  exp::EvalSection eval;
};

BaselineConfig load_baseline_config(const fs::path& path) {
  BaselineConfig c;
  exp::Section s(io::read_json(path), "baseline");
  c.filter.taps = s.get<std::size_t>("taps", c.filter.taps);
  c.filter.mu = s.get<double>("mu", c.filter.mu);
  c.filter.lambda = s.get<double>("lambda", c.filter.lambda);
  c.filter.delta = s.get<double>("delta", c.filter.delta);
  if (s.has("eval")) c.eval = exp::detail::parse_eval(s.sub("eval"));
  s.finish();
  return c;
}

int cmd_baseline(const std::string& method_name, const fs::path& config, const fs::path& data_path, const fs::path& out) {
  const auto method = baselines::method_from_string(method_name);
  const BaselineConfig cfg = load_baseline_config(config);
  const data::PairedDataset d = data::read_dataset(data_path);
  if (!d.record) throw ConfigError("baseline: data must be an fECG record (generator fecg)");
  const auto& rec = *d.record;
  const Tensor res = baselines::cancel_multichannel(rec.abdominal, rec.thorax, method, cfg.filter);

  std::ostringstream csv;
  const std::size_t ch = res.dim(0), len = res.dim(1);
  for (std::size_t c = 0; c < ch; ++c) csv << (c ? "," : "") << "r_" << c;
  csv << '\n';
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t c = 0; c < ch; ++c) csv << (c ? "," : "") << data::format_double(res[c * len + i]);
    csv << '\n';
  }
  io::write_file_atomic(out, csv.str());

  const auto ps = *exp::presence_setup(d, cfg.eval);
  const auto off = data::contiguous_offsets(len, ps.segment_length);
  const auto [tau_f, tau_m] = ps.lags(off.size());
  const auto rx = eval::presence_ratio(eval::split_segments(data::cut_segments(rec.abdominal, off, ps.segment_length)),
                                       tau_f, tau_m);
  const auto rr = eval::presence_ratio(eval::split_segments(data::cut_segments(res, off, ps.segment_length)), tau_f, tau_m);
  const json report{{"method", baselines::to_string(method)},
                    {"config", {{"filter", cfg.filter.to_json()}, {"eval", exp::eval_to_json(cfg.eval)}}},
                    {"seed", d.meta.value("seed", json(nullptr))},
                    {"data", data_path.generic_string()},
                    {"residuals_csv", out.generic_string()},
                    {"presence_x", rx.to_json()},
                    {"presence_residual", rr.to_json()}};
  fs::path rep_path = out;
  rep_path += ".presence.json";
  io::write_json(rep_path, report);
  print_json({{"R_x", rx.r ? json(*rx.r) : json(nullptr)}, {"R_residual", rr.r ? json(*rr.r) : json(nullptr)}});
  return kOk;
}

// ---------------------------------------------------------------------------
// plot

std::vector<std::size_t> decile_classes(const std::vector<double>& v) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> cls;
  for (double x : v) {
    const auto rank = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
    cls.push_back(rank * 10 / v.size());
  }
  return cls;
}

int cmd_plot(const fs::path& data_path, const std::string& kind, const fs::path& out) {
  const std::string text = io::read_file(data_path);
  svg::ScatterOptions opt;
  std::vector<double> x, y;
  std::vector<std::size_t> cls;
  if (kind == "pca-color") {
    eval::ColoringTable table;
    if (text.rfind("pc1,", 0) == 0) {
      table = eval::coloring_from_csv(text, data_path.string());
    } else {
      const auto d = data::read_dataset(data_path);
      if (!d.record) throw ConfigError("plot pca-color: data must be a coloring CSV or an fECG record");
      const auto& rec = *d.record;
      const std::size_t ch = rec.abdominal.dim(0), len = rec.length();
      std::vector<double> samples(len * ch);
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t c = 0; c < ch; ++c) samples[i * ch + c] = rec.abdominal[c * len + i];
      table = eval::pca_coloring(samples, len, ch, rec.tau_f, rec.tau_m);
    }
    std::size_t period = 1;
    for (std::size_t c : table.color_f) period = std::max(period, c + 1);
    for (std::size_t i = 0; i < table.pcs.size(); ++i) {
      x.push_back(table.pcs[i][0]);
      y.push_back(table.pcs[i][1]);
      cls.push_back(table.color_f[i] * 16 / period);
    }
    opt.title = "PCA colored by fetal phase";
  } else if (kind == "scatter") {
    const auto d = data::read_dataset(data_path);
    if (d.record || d.pairs.x.rank() != 2 || d.pairs.x.dim(1) < 2) {
      throw ConfigError("plot scatter: data must be a flat dataset with at least two x columns");
    }
    const std::size_t w = d.pairs.x.dim(1);
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      x.push_back(d.pairs.x[i * w]);
      y.push_back(d.pairs.x[i * w + 1]);
    }
    std::vector<double> key(d.pairs.size());
    const Tensor* src = d.s ? &*d.s : (d.pairs.t ? &*d.pairs.t : nullptr);
    if (src) {
      const std::size_t sw = src->numel() / src->dim(0);
      for (std::size_t i = 0; i < key.size(); ++i) key[i] = (*src)[i * sw];
      cls = decile_classes(key);
    } else {
      cls = d.pairs.t_class;
    }
    opt.x_label = "x_0";
    opt.y_label = "x_1";
    opt.title = d.s ? "x colored by source decile" : "x colored by condition";
  } else {
    throw ConfigError("plot: unknown kind '" + kind + "' (scatter or pca-color)");
  }
  io::write_file_atomic(out, svg::scatter(x, y, cls, opt));
  print_json({{"svg", out.generic_string()}, {"points", x.size()}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"icarec: hidden independent component recovery"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, data_path, system, method, kind, coloring_out, svg_out;

  auto* gen = app.add_subcommand("gen", "Generate a dataset CSV and its meta JSON");
  gen->add_option("--config", config, "Experiment config JSON")->required();
  gen->add_option("--out", out, "Output CSV path")->required();

  auto* trn = app.add_subcommand("train", "Train per config; writes checkpoints, metrics.csv and report.json");
  trn->add_option("--config", config, "Experiment config JSON")->required();
  trn->add_option("--out", out, "Output directory (default: config 'output')");

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  evl->add_option("--checkpoint", checkpoint, "Run directory or checkpoint directory")->required();
  evl->add_option("--data", data_path, "Dataset CSV")->required();
  evl->add_option("--out", out, "Output metrics JSON")->required();
  evl->add_option("--config", config, "Experiment config (default: provenance in the checkpoint)");
  evl->add_option("--export-coloring", coloring_out, "Write the code PCA coloring CSV (fECG data)");
  evl->add_option("--export-svg", svg_out, "Write the code PCA scatter SVG (fECG data)");

  auto* lem = app.add_subcommand("lemma", "Check a discrete system against the recovery lemma");
  lem->add_option("--system", system, "System JSON")->required();
  lem->add_option("--out", out, "Report JSON (default: <system stem>.report.json)");

  auto* bas = app.add_subcommand("baseline", "Adaptive-filter interference cancellation on an fECG record");
  bas->add_option("--method", method, "lms or rls")->required();
  bas->add_option("--config", config, "Filter config JSON")->required();
  bas->add_option("--data", data_path, "fECG dataset CSV")->required();
  bas->add_option("--out", out, "Residuals CSV (presence report at <out>.presence.json)")->required();

  auto* plt = app.add_subcommand("plot", "Render a deterministic SVG");
  plt->add_option("--data", data_path, "Dataset or coloring CSV")->required();
  plt->add_option("--kind", kind, "scatter or pca-color")->required();
  plt->add_option("--out", out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", kConfig, e.what());
  }

  try {
    if (gen->parsed()) return cmd_gen(config, out);
    if (trn->parsed()) return cmd_train(config, out);
    if (evl->parsed()) return cmd_eval(checkpoint, data_path, out, config, coloring_out, svg_out);
    if (lem->parsed()) return cmd_lemma(system, out);
    if (bas->parsed()) return cmd_baseline(method, config, data_path, out);
    if (plt->parsed()) return cmd_plot(data_path, kind, out);
  } catch (const io::FileNotFound& e) {
    return fail("missing_file", kMissingFile, e.what());
  } catch (const ParseError& e) {
    return fail("parse", kParse, e.what());
  } catch (const TrainingDiverged& e) {
    return fail("non_finite", kNonFinite, std::string(e.what()) + "; last checkpoint: '" + e.last_checkpoint() + "'");
  } catch (const NonFiniteError& e) {
    return fail("non_finite", kNonFinite, e.what());
  } catch (const ConfigError& e) {
    return fail("config", kConfig, e.what());
  } catch (const ShapeError& e) {
    return fail("config", kConfig, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("config", kConfig, e.what());
  } catch (const std::exception& e) {
    return fail("other", kOther, e.what());
  }
  return kOther;
}
