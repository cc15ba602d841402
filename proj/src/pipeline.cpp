#include "canoncache/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <functional>

#include "canoncache/io.hpp"

namespace canoncache::pipeline {

namespace fs = std::filesystem;

std::vector<json> fingerprint_all(std::span<const Query> dataset, const fingerprint::Lexicons& lexicons) {
  std::vector<json> out;
  out.reserve(dataset.size());
  for (const auto& q : dataset) out.push_back(io::to_json(fingerprint::fingerprint(q, lexicons), q.id));
  return out;
}

std::vector<PredictionRecord> classify_all(std::span<const Query> dataset, const proto::EmbeddingTable& table,
                                           const proto::PrototypeModel& model) {
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& q : dataset) ids.push_back(q.id);
  return proto::classify_batch(ids, table, model);
}

metrics::KeyQualityReport key_quality(std::span<const Query> truth, std::span<const PredictionRecord> predictions,
                                      double beta) {
  const auto joined = io::join_labels(truth, predictions);
  std::vector<std::string> intents;
  std::vector<std::string> keys;
  for (const auto& j : joined) {
    intents.push_back(j.query->true_intent->str());
    keys.push_back(canonical_key_string(j.prediction->predicted_key));
  }
  return metrics::report(intents, keys, beta);
}

risk::CalibrationSet calibration_set(std::span<const Query> truth, std::span<const PredictionRecord> predictions) {
  std::vector<risk::CalibrationRecord> records;
  for (const auto& j : io::join_labels(truth, predictions)) {
    records.push_back({j.prediction->confidence, j.correct});
  }
  return risk::CalibrationSet(std::move(records));
}

std::optional<TemperatureReport> temperature_report(std::span<const Query> truth,
                                                    std::span<const PredictionRecord> predictions) {
  std::vector<proto::RawScores> raw;
  std::vector<proto::ScoredOutcome> before;
  for (const auto& j : io::join_labels(truth, predictions)) {
    const auto& p = *j.prediction;
    const auto key = j.query->true_intent->as_key();
    if (!p.class_scores || !key || !p.class_scores->contains(*key)) return std::nullopt;
    proto::RawScores r{{}, *key};
    // log-probabilities act as logits; softmax(log s / T) is s^(1/T) renormalized
    for (const auto& [k, s] : *p.class_scores) r.scores.emplace_back(k, std::log(std::max(s, 1e-12)));
    raw.push_back(std::move(r));
    before.push_back({p.confidence, j.correct});
  }
  if (raw.size() < 2) return std::nullopt;
  TemperatureReport rep;
  rep.before = proto::ece(before);
  const double t = proto::fit_temperature(raw);
  std::vector<proto::ScoredOutcome> after;
  after.reserve(raw.size());
  for (const auto& r : raw) after.push_back(proto::rescore(r, t));
  rep.after = proto::ece(after);
  rep.after.fitted_temperature = t;
  rep.nll_before = proto::temperature_nll(raw, 1.0);
  rep.nll_after = proto::temperature_nll(raw, t);
  return rep;
}

json certificate_json(const risk::ThresholdCertificate& cert, std::span<const Query> truth,
                      std::span<const PredictionRecord> predictions) {
  json j = io::to_json(cert);
  if (auto rep = temperature_report(truth, predictions)) {
    j["calibration"] = json{{"ece_before", rep->before.ece},
                            {"ece_after", rep->after.ece},
                            {"temperature", rep->after.fitted_temperature},
                            {"nll_before", rep->nll_before},
                            {"nll_after", rep->nll_after}};
  } else {
    j["calibration"] = nullptr;
  }
  return j;
}

json cost_json(const cost::CostConfig& cfg, long requests_per_day) {
  json strategies = json::array();
  for (const auto& r : cost::compare_strategies(cfg, requests_per_day)) {
    strategies.push_back(json{{"name", r.name},
                              {"monthly_cost_usd", r.result.monthly_cost_usd},
                              {"savings_pct", r.result.savings_pct},
                              {"local_share", r.result.local_share}});
  }
  const std::vector<long> volumes{50, 1000, 10000, 100000};
  json scaling = json::array();
  for (const auto& row : cost::scaling_table(cfg, volumes)) {
    scaling.push_back(json{{"requests_per_day", row.requests_per_day},
                           {"monthly_cost_usd", row.monthly_cost_usd},
                           {"w5h2_savings_pct", row.tiered_savings_pct}});
  }
  return json{{"requests_per_day", requests_per_day},
              {"days", cfg.days},
              {"strategies", strategies},
              {"scaling", scaling}};
}

std::string sensitivity_csv(const cost::CostConfig& cfg, std::span<const double> local_shares,
                            long requests_per_day) {
  std::string out = "local_share,cheap_share,deep_share,monthly_cost_usd,savings_pct\n";
  char buf[256];
  for (const auto& p : cost::sensitivity(cfg, local_shares, requests_per_day)) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6f,%.4f\n", p.local_share, p.cheap_share, p.deep_share,
                  p.result.monthly_cost_usd, p.result.savings_pct);
    out += buf;
  }
  return out;
}

// ---- config parsing ----

namespace {

fs::path resolve(const fs::path& base, const YAML::Node& node) {
  if (!node || node.IsNull()) return {};
  fs::path p = node.as<std::string>();
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

ResolverKind parse_resolver(const std::string& s) {
  if (s == "none") return ResolverKind::none;
  if (s == "oracle") return ResolverKind::oracle;
  if (s == "stub") return ResolverKind::stub;
  if (s == "oracle_or_stub") return ResolverKind::oracle_or_stub;
  throw Error(ErrorCode::Validation, "resolver must be none, oracle, stub or oracle_or_stub; got '" + s + "'");
}

SimulationConfig parse_simulation(const YAML::Node& root, const fs::path& base) {
  SimulationConfig cfg;
  cfg.lexicons = resolve(base, root["lexicons"]);
  cfg.model = resolve(base, root["model"]);
  cfg.tier1_model = resolve(base, root["tier1_model"]);
  cfg.embeddings = resolve(base, root["embeddings"]);
  cfg.predictions = resolve(base, root["predictions"]);
  cfg.plans = resolve(base, root["plans"]);
  cfg.retraining_pool = resolve(base, root["retraining_pool"]);
  if (root["warm"]) cfg.warm = root["warm"].as<bool>();
  if (const auto tiers = root["tiers"]) {
    for (const auto& kv : tiers) {
      const auto name = kv.first.as<std::string>();
      if (name.size() != 5 || name.rfind("tier", 0) != 0 || name[4] < '0' || name[4] > '4') {
        throw Error(ErrorCode::Validation, "unknown tier '" + name + "' (expected tier0..tier4)");
      }
      auto& t = cfg.engine.tiers[name[4] - '0'];
      if (kv.second["enabled"]) t.enabled = kv.second["enabled"].as<bool>();
      if (kv.second["threshold"]) t.threshold = kv.second["threshold"].as<double>();
    }
  }
  if (const auto r = root["resolvers"]) {
    if (r["cheap"]) cfg.cheap = parse_resolver(r["cheap"].as<std::string>());
    if (r["deep"]) cfg.deep = parse_resolver(r["deep"].as<std::string>());
    if (r["latency_ms"]) cfg.latency_ms = r["latency_ms"].as<int>();
  }
  if (cfg.latency_ms < 0) throw Error(ErrorCode::Validation, "latency_ms must be >= 0");
  if (cfg.lexicons.empty()) throw Error(ErrorCode::Validation, "config needs a lexicons directory");
  cfg.engine.validate();
  return cfg;
}

YAML::Node load_yaml(const fs::path& file) {
  try {
    return YAML::LoadFile(file.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::Io, "cannot read config " + file.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::Validation, "bad config " + file.string() + ": " + e.what());
  }
}

template <typename Fn>
auto with_yaml_errors(const fs::path& file, Fn&& fn) {
  try {
    return fn();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::Validation, "bad config " + file.string() + ": " + e.what());
  }
}

cascade::Resolver make_resolver(ResolverKind kind, int latency_ms,
                                const std::shared_ptr<const cascade::PlanLibrary>& library,
                                const std::shared_ptr<const fingerprint::Lexicons>& lexicons) {
  switch (kind) {
    case ResolverKind::none:
      return {};
    case ResolverKind::oracle:
      return cascade::oracle_resolver(library);
    case ResolverKind::stub:
      return cascade::stub_resolver(latency_ms, lexicons);
    case ResolverKind::oracle_or_stub: {
      auto oracle = cascade::oracle_resolver(library);
      auto stub = cascade::stub_resolver(latency_ms, lexicons);
      return [oracle, stub](const Query& q) {
        auto a = oracle(q);
        return a ? a : stub(q);
      };
    }
  }
  return {};
}

}  // namespace

SimulationConfig SimulationConfig::load(const fs::path& file) {
  const auto root = load_yaml(file);
  return with_yaml_errors(file, [&] { return parse_simulation(root, file.parent_path()); });
}

BuiltEngine build_engine(const SimulationConfig& cfg, bool truncate_pool) {
  auto lexicons = std::make_shared<const fingerprint::Lexicons>(fingerprint::Lexicons::load(cfg.lexicons));
  BuiltEngine built;
  built.engine = std::make_unique<cascade::Engine>(*lexicons, cfg.engine);
  auto& engine = *built.engine;

  std::shared_ptr<const proto::EmbeddingTable> table;
  auto need_table = [&] {
    if (!table) {
      if (cfg.embeddings.empty()) throw Error(ErrorCode::Validation, "a model needs an embeddings file");
      table = std::make_shared<const proto::EmbeddingTable>(io::read_embeddings(cfg.embeddings));
    }
    return table;
  };
  if (!cfg.predictions.empty()) {
    engine.set_classifier(2, std::make_shared<cascade::ReplayClassifier>(io::read_predictions(cfg.predictions)));
  } else if (!cfg.model.empty()) {
    engine.set_classifier(2, std::make_shared<cascade::PrototypeClassifier>(io::read_model(cfg.model), need_table()));
  }
  if (!cfg.tier1_model.empty()) {
    engine.set_classifier(
        1, std::make_shared<cascade::PrototypeClassifier>(io::read_model(cfg.tier1_model), need_table()));
  }

  auto library = std::make_shared<const cascade::PlanLibrary>(
      cfg.plans.empty() ? cascade::PlanLibrary{} : io::read_plan_library(cfg.plans));
  if (cfg.warm) engine.warm(*library);
  engine.set_cheap_resolver(make_resolver(cfg.cheap, cfg.latency_ms, library, lexicons));
  engine.set_deep_resolver(make_resolver(cfg.deep, cfg.latency_ms, library, lexicons));

  if (!cfg.retraining_pool.empty()) {
    if (cfg.retraining_pool.has_parent_path()) fs::create_directories(cfg.retraining_pool.parent_path());
    built.pool = std::make_shared<cascade::RetrainingPool>(cfg.retraining_pool, truncate_pool);
    engine.set_retraining_pool(built.pool);
  }
  return built;
}

json simulation_json(const cascade::SimulationResult& result) {
  json res = json::array();
  for (const auto& r : result.resolutions) res.push_back(io::to_json(r));
  return json{{"stats", io::to_json(result.stats)}, {"resolutions", res}};
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  const auto root = load_yaml(file);
  const auto base = file.parent_path();
  return with_yaml_errors(file, [&] {
    PipelineConfig cfg;
    cfg.dataset = resolve(base, root["dataset"]);
    if (cfg.dataset.empty()) throw Error(ErrorCode::Validation, "pipeline config needs a dataset");
    if (!root["simulate"]) throw Error(ErrorCode::Validation, "pipeline config needs a simulate block");
    cfg.simulation = parse_simulation(root["simulate"], base);
    if (root["seed"]) cfg.seed = root["seed"].as<std::uint64_t>();
    if (const auto m = root["metrics"]; m && m["beta"]) cfg.beta = m["beta"].as<double>();
    if (const auto s = root["sweep"]) {
      if (s["grid_size"]) cfg.grid_size = s["grid_size"].as<std::size_t>();
      if (s["lo"]) cfg.grid_lo = s["lo"].as<double>();
      if (s["hi"]) cfg.grid_hi = s["hi"].as<double>();
    }
    cfg.bound.grid = risk::uniform_grid(cfg.grid_size, cfg.grid_lo, cfg.grid_hi);
    if (const auto c = root["calibrate"]) {
      if (c["variant"]) {
        const auto name = c["variant"].as<std::string>();
        const auto v = risk::parse_variant(name);
        if (!v) throw Error(ErrorCode::Validation, "unknown bound variant '" + name + "'");
        cfg.bound.variant = *v;
      }
      if (c["alpha"]) cfg.bound.alpha = c["alpha"].as<double>();
      if (c["delta"]) cfg.bound.delta = c["delta"].as<double>();
    }
    cfg.bound.validate();
    if (const auto c = root["cost"]) {
      cfg.cost_config = resolve(base, c["config"]);
      if (c["req_per_day"]) cfg.requests_per_day = c["req_per_day"].as<long>();
    }
    return cfg;
  });
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  PipelineResult result;

  auto stage = [](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    } catch (const std::exception& e) {
      throw StageError(name, Error(ErrorCode::Io, e.what()));
    }
  };
  auto emit = [&](const std::string& name, const std::string& file, const std::string& contents) {
    io::write_file(out_dir / file, contents);
    result.artifacts.push_back({name, file, io::content_hash(out_dir / file)});
  };
  auto jsonl = [](const auto& rows) {
    std::string s;
    for (const auto& r : rows) s += r.dump() + "\n";
    return s;
  };

  const auto dataset = stage("load", [&] { return io::read_dataset(cfg.dataset); });
  const auto lexicons = stage("fingerprint", [&] { return fingerprint::Lexicons::load(cfg.simulation.lexicons); });

  stage("fingerprint", [&] { emit("fingerprint", "fingerprints.jsonl", jsonl(fingerprint_all(dataset, lexicons))); });

  const auto predictions = stage("classify", [&] {
    if (cfg.simulation.model.empty()) throw Error(ErrorCode::Validation, "no model path configured");
    if (cfg.simulation.embeddings.empty()) throw Error(ErrorCode::Validation, "no embeddings path configured");
    const auto model = io::read_model(cfg.simulation.model);
    const auto table = io::read_embeddings(cfg.simulation.embeddings);
    auto preds = classify_all(dataset, table, model);
    std::vector<json> rows;
    for (const auto& p : preds) rows.push_back(io::to_json(p));
    emit("classify", "predictions.jsonl", jsonl(rows));
    return preds;
  });

  stage("simulate", [&] {
    auto sim = cfg.simulation;
    sim.retraining_pool = out_dir / "retraining_pool.jsonl";
    auto built = build_engine(sim, /*truncate_pool=*/true);
    const auto res = cascade::simulate(dataset, *built.engine);
    emit("simulate", "simulation.json", simulation_json(res).dump(2) + "\n");
  });

  stage("metrics", [&] {
    emit("metrics", "metrics.json", io::to_json(key_quality(dataset, predictions, cfg.beta)).dump(2) + "\n");
  });

  const auto cal = stage("sweep", [&] {
    auto c = calibration_set(dataset, predictions);
    const auto grid = risk::uniform_grid(cfg.grid_size, cfg.grid_lo, cfg.grid_hi);
    emit("sweep", "sweep.csv", io::curve_csv(risk::risk_coverage_sweep(c, grid)));
    return c;
  });

  stage("calibrate", [&] {
    result.certificate = risk::select_threshold(cal, cfg.bound);
    emit("calibrate", "certificate.json",
         certificate_json(result.certificate, dataset, predictions).dump(2) + "\n");
  });

  stage("cost", [&] {
    const auto cc = cfg.cost_config.empty() ? cost::CostConfig{} : cost::CostConfig::load(cfg.cost_config);
    emit("cost", "cost.json", cost_json(cc, cfg.requests_per_day).dump(2) + "\n");
  });

  json artifacts = json::array();
  for (const auto& a : result.artifacts) {
    artifacts.push_back(json{{"stage", a.stage}, {"path", a.path}, {"fnv1a64", a.fnv1a64}});
  }
  json manifest{{"seed", cfg.seed},
                {"inputs", json{{"dataset", io::content_hash(cfg.dataset)}}},
                {"artifacts", artifacts},
                {"retraining_pool", json{{"path", "retraining_pool.jsonl"},
                                         {"fnv1a64", io::content_hash(out_dir / "retraining_pool.jsonl")}}},
                {"certificate_feasible", result.certificate.feasible()}};
  result.manifest = out_dir / "manifest.json";
  io::write_json(result.manifest, manifest);
  return result;
}

}  // namespace canoncache::pipeline
