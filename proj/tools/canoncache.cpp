// canoncache command-line front end.
//
// Exit status: 0 success, 1 I/O failure, 2 validation error (bad input or
// flags), 3 infeasible threshold certificate.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "canoncache/cascade.hpp"
#include "canoncache/io.hpp"
#include "canoncache/pipeline.hpp"
#include "canoncache/synthetic.hpp"

namespace fs = std::filesystem;
using namespace canoncache;
using nlohmann::json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void emit(const Globals& g, const std::string& contents) {
  if (g.out.empty() || g.out == "-") {
    std::fwrite(contents.data(), 1, contents.size(), stdout);
  } else {
    io::write_file(g.out, contents);
  }
}

std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

std::string require(const std::string& value, const char* what) {
  if (value.empty()) throw Error(ErrorCode::Validation, std::string("missing required ") + what);
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canoncache: canonical cache keys, cascade simulation and risk-controlled thresholds"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (gen-synthetic, pipeline)");
  app.add_option("--config", g.config, "YAML config file");
  app.add_option("--out", g.out, "output file or directory (default stdout)");

  // fingerprint
  std::string fp_input, fp_lexicons;
  auto* fp = app.add_subcommand("fingerprint", "template hash and parameters per query");
  fp->add_option("--input", fp_input)->required();
  fp->add_option("--lexicons", fp_lexicons)->required();

  // embed
  std::string em_input, em_lexicons;
  std::size_t em_dim = 64;
  auto* em = app.add_subcommand("embed", "hashed bag-of-words embeddings for a dataset");
  em->add_option("--input", em_input)->required();
  em->add_option("--lexicons", em_lexicons)->required();
  em->add_option("--dim", em_dim);

  // fit
  std::string fit_input, fit_embeddings;
  std::size_t fit_per_class = 8;
  double fit_temperature = 1.0;
  auto* fit = app.add_subcommand("fit", "prototype model from the first N labeled examples per class");
  fit->add_option("--input", fit_input)->required();
  fit->add_option("--embeddings", fit_embeddings)->required();
  fit->add_option("--per-class", fit_per_class);
  fit->add_option("--temperature", fit_temperature);

  // classify
  std::string cl_model, cl_embeddings, cl_input;
  auto* cl = app.add_subcommand("classify", "nearest-prototype prediction log");
  cl->add_option("--model", cl_model)->required();
  cl->add_option("--embeddings", cl_embeddings)->required();
  cl->add_option("--input", cl_input)->required();

  // simulate
  std::string sim_input, sim_resolutions;
  auto* sim = app.add_subcommand("simulate", "route a dataset through the tier cascade");
  sim->add_option("--input", sim_input)->required();
  sim->add_option("--resolutions", sim_resolutions, "per-query resolution JSONL");

  // metrics
  std::string mt_truth, mt_pred;
  double mt_beta = 1.0;
  auto* mt = app.add_subcommand("metrics", "cache-key quality report");
  mt->add_option("--truth", mt_truth)->required();
  mt->add_option("--pred", mt_pred)->required();
  mt->add_option("--beta", mt_beta);

  // sweep
  std::string sw_truth, sw_pred;
  std::size_t sw_k = 100;
  double sw_lo = 0.0, sw_hi = 0.99;
  auto* sw = app.add_subcommand("sweep", "risk-coverage curve CSV");
  sw->add_option("--truth", sw_truth)->required();
  sw->add_option("--pred", sw_pred)->required();
  sw->add_option("--grid-size", sw_k);
  sw->add_option("--lo", sw_lo);
  sw->add_option("--hi", sw_hi);

  // calibrate
  std::string ca_truth, ca_pred, ca_variant = "ltt_eb";
  double ca_alpha = 0.10, ca_delta = 0.10;
  std::size_t ca_k = 100;
  auto* ca = app.add_subcommand("calibrate", "risk-controlled threshold certificate");
  ca->add_option("--truth", ca_truth)->required();
  ca->add_option("--pred", ca_pred)->required();
  ca->add_option("--alpha", ca_alpha);
  ca->add_option("--delta", ca_delta);
  ca->add_option("--variant", ca_variant)
      ->check(CLI::IsMember({"hoeffding_union", "eb_union", "ltt_hoeffding", "ltt_eb"}));
  ca->add_option("--grid-size", ca_k);

  // cost
  long co_rpd = 50;
  std::string co_sensitivity;
  auto* co = app.add_subcommand("cost", "monthly API cost by strategy");
  co->add_option("--req-per-day", co_rpd);
  co->add_option("--sensitivity", co_sensitivity, "lo:hi:step local shares; emits CSV");

  // gen-synthetic
  std::optional<std::size_t> gs_classes, gs_per_class, gs_dim;
  std::optional<double> gs_accuracy, gs_scale, gs_separation;
  std::optional<std::string> gs_model;
  std::string gs_lexicons;
  auto* gs = app.add_subcommand("gen-synthetic", "synthetic dataset, embeddings, prediction log and model");
  gs->add_option("--classes", gs_classes);
  gs->add_option("--per-class", gs_per_class);
  gs->add_option("--accuracy", gs_accuracy);
  gs->add_option("--confidence-model", gs_model)->check(CLI::IsMember({"calibrated", "overconfident"}));
  gs->add_option("--scale", gs_scale);
  gs->add_option("--dim", gs_dim);
  gs->add_option("--separation", gs_separation);
  gs->add_option("--lexicons", gs_lexicons);

  auto* pl = app.add_subcommand("pipeline", "all stages end to end plus a run manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*fp) {
      const auto ds = io::read_dataset(fp_input);
      emit(g, jsonl(pipeline::fingerprint_all(ds, fingerprint::Lexicons::load(fp_lexicons))));
    } else if (*em) {
      const auto ds = io::read_dataset(em_input);
      const auto table = synthetic::embed_dataset(ds, fingerprint::Lexicons::load(em_lexicons), em_dim);
      if (g.out.empty()) throw Error(ErrorCode::Validation, "embed needs --out");
      io::write_embeddings(g.out, table);
    } else if (*fit) {
      const auto ds = io::read_dataset(fit_input);
      const auto table = io::read_embeddings(fit_embeddings);
      std::map<CacheKey, std::size_t, CanonicalOrder> taken;
      std::vector<std::pair<std::string, CacheKey>> examples;
      for (const auto& q : ds) {
        if (!q.true_intent) continue;
        const auto key = q.true_intent->as_key();
        if (!key) throw Error(ErrorCode::Validation, "intent '" + q.true_intent->str() + "' is not action:target");
        if (taken[*key]++ < fit_per_class) examples.emplace_back(q.id, *key);
      }
      const auto model = proto::fit_centroids(examples, table).with_temperature(fit_temperature);
      emit(g, io::to_json(model).dump(2) + "\n");
    } else if (*cl) {
      const auto ds = io::read_dataset(cl_input);
      const auto preds =
          pipeline::classify_all(ds, io::read_embeddings(cl_embeddings), io::read_model(cl_model));
      std::vector<json> rows;
      for (const auto& p : preds) rows.push_back(io::to_json(p));
      emit(g, jsonl(rows));
    } else if (*sim) {
      const auto cfg = pipeline::SimulationConfig::load(require(g.config, "--config"));
      const auto ds = io::read_dataset(sim_input);
      auto built = pipeline::build_engine(cfg, /*truncate_pool=*/false);
      const auto res = cascade::simulate(ds, *built.engine);
      if (!sim_resolutions.empty()) {
        std::vector<json> rows;
        for (const auto& r : res.resolutions) rows.push_back(io::to_json(r));
        io::write_file(sim_resolutions, jsonl(rows));
      }
      emit(g, io::to_json(res.stats).dump(2) + "\n");
    } else if (*mt) {
      const auto truth = io::read_dataset(mt_truth);
      const auto preds = io::read_predictions(mt_pred);
      emit(g, io::to_json(pipeline::key_quality(truth, preds, mt_beta)).dump(2) + "\n");
    } else if (*sw) {
      const auto truth = io::read_dataset(sw_truth);
      const auto preds = io::read_predictions(sw_pred);
      if (sw_k < 1 || !(sw_lo <= sw_hi)) throw Error(ErrorCode::Validation, "bad sweep grid");
      const auto cal = pipeline::calibration_set(truth, preds);
      emit(g, io::curve_csv(risk::risk_coverage_sweep(cal, risk::uniform_grid(sw_k, sw_lo, sw_hi))));
    } else if (*ca) {
      const auto truth = io::read_dataset(ca_truth);
      const auto preds = io::read_predictions(ca_pred);
      risk::BoundSpec spec{*risk::parse_variant(ca_variant), ca_alpha, ca_delta, risk::uniform_grid(ca_k)};
      spec.validate();
      const auto cert = risk::select_threshold(pipeline::calibration_set(truth, preds), spec);
      emit(g, pipeline::certificate_json(cert, truth, preds).dump(2) + "\n");
      if (!cert.feasible()) {
        std::fprintf(stderr, "canoncache: no threshold meets alpha=%g at delta=%g\n", ca_alpha, ca_delta);
        return kExitInfeasible;
      }
    } else if (*co) {
      const auto cfg = g.config.empty() ? cost::CostConfig{} : cost::CostConfig::load(g.config);
      if (co_rpd < 0) throw Error(ErrorCode::Validation, "--req-per-day must be >= 0");
      if (!co_sensitivity.empty()) {
        emit(g, pipeline::sensitivity_csv(cfg, io::parse_range(co_sensitivity), co_rpd));
      } else {
        emit(g, pipeline::cost_json(cfg, co_rpd).dump(2) + "\n");
      }
    } else if (*gs) {
      auto spec = g.config.empty() ? synthetic::SyntheticSpec{} : synthetic::SyntheticSpec::load(g.config);
      if (gs_classes) spec.n_classes = *gs_classes;
      if (gs_per_class) spec.n_per_class = *gs_per_class;
      if (gs_accuracy) spec.accuracy = *gs_accuracy;
      if (gs_model) {
        spec.confidence_model = *gs_model == "overconfident" ? synthetic::ConfidenceModel::overconfident
                                                             : synthetic::ConfidenceModel::calibrated;
      }
      if (gs_scale) spec.scale = *gs_scale;
      if (gs_dim) spec.dim = *gs_dim;
      if (gs_separation) spec.separation = *gs_separation;
      if (g.seed) spec.seed = *g.seed;
      const fs::path dir = require(g.out, "--out directory");
      const auto lex = gs_lexicons.empty() ? fingerprint::Lexicons{} : fingerprint::Lexicons::load(gs_lexicons);
      const auto corpus = synthetic::generate(spec, lex);
      io::write_dataset(dir / "dataset.jsonl", corpus.dataset);
      io::write_embeddings(dir / "embeddings.jsonl", corpus.embeddings);
      io::write_predictions(dir / "predictions.jsonl", corpus.predictions);
      io::write_model(dir / "model.json", corpus.model);
    } else if (*pl) {
      auto cfg = pipeline::PipelineConfig::load(require(g.config, "--config"));
      if (g.seed) cfg.seed = *g.seed;
      const auto res = pipeline::run_pipeline(cfg, require(g.out, "--out directory"));
      std::cout << res.manifest.string() << "\n";
      if (!res.certificate.feasible()) {
        std::fprintf(stderr, "canoncache: certificate infeasible; artifacts written\n");
        return kExitInfeasible;
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "canoncache: %s\n", e.what());
    return e.code() == ErrorCode::Io ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "canoncache: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "canoncache: %s\n", e.what());
    return kExitValidation;
  }
  return 0;
}
