#include "canoncache/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace canoncache::io {

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Validation,
                  path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    try {
      fn(j, lineno);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Validation, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void require_fields(const json& j, std::initializer_list<const char*> required,
                    std::initializer_list<const char*> optional) {
  if (!j.is_object()) throw Error(ErrorCode::Validation, "record is not a JSON object");
  std::set<std::string> allowed;
  for (const char* f : required) {
    if (!j.contains(f)) throw Error(ErrorCode::Validation, std::string("missing field '") + f + "'");
    allowed.insert(f);
  }
  for (const char* f : optional) allowed.insert(f);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw Error(ErrorCode::Validation, "unexpected field '" + k + "'");
  }
}

std::string join_lines(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const json& value) {
  write_file(path, value.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, path.string() + ": invalid JSON: " + e.what());
  }
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string content_hash(const std::filesystem::path& path) {
  return hex64(fingerprint::fnv1a64(read_file(path)));
}

json to_json(const Query& q) {
  json j{{"id", q.id}, {"text", q.text}, {"language", q.language}};
  if (q.true_intent) j["intent"] = q.true_intent->str();
  return j;
}

Query query_from_json(const json& j) {
  require_fields(j, {"id", "text", "language"}, {"intent"});
  Query q;
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.language = j.at("language").get<std::string>();
  if (j.contains("intent") && !j.at("intent").is_null()) {
    q.true_intent = IntentLabel(j.at("intent").get<std::string>());
  }
  q.validate();
  return q;
}

std::vector<Query> read_dataset(const std::filesystem::path& path) {
  std::vector<Query> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const json& j, std::size_t) {
    Query q = query_from_json(j);
    if (!seen.insert(q.id).second) throw Error(ErrorCode::Validation, "duplicate id '" + q.id + "'");
    out.push_back(std::move(q));
  });
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const Query> queries) {
  std::vector<json> rows;
  for (const auto& q : queries) rows.push_back(to_json(q));
  write_file(path, join_lines(rows));
}

json to_json(const PredictionRecord& r) {
  json j{{"id", r.query_id}, {"key", canonical_key_string(r.predicted_key)}, {"confidence", r.confidence}};
  if (r.class_scores) {
    json scores = json::object();
    for (const auto& [key, s] : *r.class_scores) scores[canonical_key_string(key)] = s;
    j["scores"] = std::move(scores);
  }
  return j;
}

PredictionRecord prediction_from_json(const json& j) {
  require_fields(j, {"id", "key", "confidence"}, {"scores"});
  PredictionRecord r{j.at("id").get<std::string>(), parse_cache_key(j.at("key").get<std::string>()),
                     j.at("confidence").get<double>(), std::nullopt};
  if (j.contains("scores") && !j.at("scores").is_null()) {
    ClassScores scores;
    for (const auto& [k, v] : j.at("scores").items()) scores.emplace(parse_cache_key(k), v.get<double>());
    r.class_scores = std::move(scores);
  }
  r.validate();
  return r;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for_each_line(path, [&](const json& j, std::size_t) { out.push_back(prediction_from_json(j)); });
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::vector<json> rows;
  for (const auto& r : records) rows.push_back(to_json(r));
  write_file(path, join_lines(rows));
}

proto::EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  std::optional<proto::EmbeddingTable> table;
  for_each_line(path, [&](const json& j, std::size_t) {
    if (!table) {
      require_fields(j, {"dim"}, {});
      const auto dim = j.at("dim").get<long long>();
      if (dim <= 0) throw Error(ErrorCode::Validation, "dim must be positive");
      table.emplace(static_cast<std::size_t>(dim));
      return;
    }
    require_fields(j, {"id", "vector"}, {});
    table->insert(j.at("id").get<std::string>(), j.at("vector").get<std::vector<double>>());
  });
  if (!table) throw Error(ErrorCode::Validation, path.string() + ": missing {\"dim\": N} header");
  return std::move(*table);
}

void write_embeddings(const std::filesystem::path& path, const proto::EmbeddingTable& table) {
  std::vector<json> rows;
  rows.push_back(json{{"dim", table.dim()}});
  for (const auto& [id, vec] : table.vectors()) rows.push_back(json{{"id", id}, {"vector", vec}});
  write_file(path, join_lines(rows));
}

json to_json(const proto::PrototypeModel& model) {
  json centroids = json::object();
  for (const auto& [key, c] : model.centroids()) centroids[canonical_key_string(key)] = c;
  return json{{"dim", model.dim()}, {"temperature", model.temperature()}, {"centroids", centroids}};
}

proto::PrototypeModel model_from_json(const json& j) {
  require_fields(j, {"dim", "temperature", "centroids"}, {});
  std::map<CacheKey, proto::Vector, CanonicalOrder> centroids;
  for (const auto& [k, v] : j.at("centroids").items()) {
    centroids.emplace(parse_cache_key(k), v.get<proto::Vector>());
  }
  return proto::PrototypeModel(j.at("dim").get<std::size_t>(), std::move(centroids),
                               j.at("temperature").get<double>());
}

proto::PrototypeModel read_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, path.string() + ": " + e.what());
  }
}

void write_model(const std::filesystem::path& path, const proto::PrototypeModel& model) {
  write_json(path, to_json(model));
}

cascade::PlanLibrary read_plan_library(const std::filesystem::path& path) {
  cascade::PlanLibrary lib;
  for_each_line(path, [&](const json& j, std::size_t) {
    require_fields(j, {"key", "steps"}, {});
    cascade::PlanTemplate plan{parse_cache_key(j.at("key").get<std::string>()),
                               j.at("steps").get<std::vector<std::string>>()};
    plan.validate();
    lib.insert_or_assign(plan.key, std::move(plan));
  });
  return lib;
}

json to_json(const fingerprint::FingerprintResult& fp, const std::string& id) {
  json params = json::object();
  for (const auto& [slot, value] : fp.params.slots()) params[std::string(slot_name(slot))] = value;
  return json{{"id", id},
              {"hash", hex64(fp.fingerprint.hash)},
              {"template", fp.fingerprint.template_text},
              {"params", params}};
}

json to_json(const cascade::Resolution& r) {
  json j{{"id", r.query_id}, {"tier", r.resolved_tier}, {"cache_hit", r.was_cache_hit}};
  j["key"] = r.key ? json(canonical_key_string(*r.key)) : json(nullptr);
  j["confidence"] = optional_number(r.confidence);
  if (r.plan) {
    j["plan"] = r.plan->steps;
    j["missing"] = r.plan->missing;
  } else {
    j["plan"] = nullptr;
    j["missing"] = json::array();
  }
  return j;
}

json to_json(const cascade::TrafficStats& s) {
  return json{{"total", s.total},
              {"per_tier", s.per_tier},
              {"covered", s.covered},
              {"coverage", s.coverage()},
              {"labeled_covered", s.labeled_covered},
              {"correct_covered", s.correct_covered},
              {"safety", optional_number(s.safety())},
              {"unsafe_rate", optional_number(s.unsafe_rate())}};
}

json to_json(const metrics::KeyQualityReport& r) {
  return json{{"h", r.h},           {"c", r.c},
              {"v", r.v},           {"beta", r.beta},
              {"mi", r.mi},         {"ami", r.ami},
              {"fmi", r.fmi},       {"h_intent", r.h_intent},
              {"h_key", r.h_key},   {"rate_bits", r.rate_bits},
              {"distortion", r.distortion}, {"n_keys", r.n_keys}};
}

json to_json(const risk::ThresholdCertificate& c) {
  return json{{"tau_star", optional_number(c.tau_star)},
              {"feasible", c.feasible()},
              {"variant", std::string(risk::variant_name(c.variant))},
              {"alpha", c.alpha},
              {"delta", c.delta},
              {"n", c.n},
              {"ucb_at_tau", c.ucb_at_tau},
              {"calib_coverage", c.calib_coverage}};
}

json to_json(const proto::CalibrationReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back(json{{"mean_confidence", b.mean_confidence}, {"accuracy", b.accuracy}, {"count", b.count}});
  }
  return json{{"ece", r.ece}, {"bins", bins}, {"fitted_temperature", r.fitted_temperature}};
}

std::string curve_csv(std::span<const risk::CurvePoint> curve) {
  std::string out = "tau,coverage,safety,risk\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.6g,%.17g,", p.tau, p.coverage);
    out += buf;
    if (p.safety) {
      std::snprintf(buf, sizeof buf, "%.17g", *p.safety);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", p.risk);
    out += buf;
  }
  return out;
}

std::vector<LabeledPrediction> join_labels(std::span<const Query> truth,
                                           std::span<const PredictionRecord> predictions) {
  std::unordered_map<std::string, const Query*> by_id;
  for (const auto& q : truth) by_id.emplace(q.id, &q);
  std::vector<LabeledPrediction> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    auto it = by_id.find(p.query_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::Validation, "prediction for unknown id '" + p.query_id + "'");
    }
    if (!it->second->true_intent) {
      throw Error(ErrorCode::Validation, "query '" + p.query_id + "' has no intent label");
    }
    out.push_back({it->second, &p, it->second->true_intent->matches(p.predicted_key)});
  }
  return out;
}

std::vector<double> parse_range(const std::string& spec) {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
  char c1 = 0;
  char c2 = 0;
  std::istringstream ss(spec);
  if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || hi < lo) {
    throw Error(ErrorCode::Validation, "range must look like lo:hi:step, got '" + spec + "'");
  }
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 0.5));
  for (long i = 0; i <= count; ++i) {
    // round to 12 decimals so 0.05 steps print as 0.05, not 0.050000000000000003
    out.push_back(std::round((lo + step * static_cast<double>(i)) * 1e12) / 1e12);
  }
  return out;
}

}  // namespace canoncache::io
