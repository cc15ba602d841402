#include "canoncache/synthetic.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "canoncache/risk.hpp"

namespace canoncache::synthetic {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

const std::vector<std::string> kNames{"alice", "bob", "carol", "dave", "erin", "frank", "grace", "john"};
const std::vector<std::string> kTimes{"5pm", "9am", "tomorrow", "tonight", "monday", "friday"};
const std::vector<std::string> kAmounts{"20", "50", "100", "250", "1000"};
const std::vector<std::string> kTickers{"nvda", "aapl", "msft", "tsla"};

// dropped from embedding features; the lexicon stopwords include verbs that carry the action
const std::set<std::string, std::less<>> kFunctionWords{"a",  "an", "the", "to", "for", "from", "with",
                                                        "me", "my", "i",   "is", "of",  "at",   "in",
                                                        "on", "please", "can", "you", "some", "any"};

std::vector<std::string> pool_or(const std::set<std::string, std::less<>>& lex,
                                 const std::vector<std::string>& fallback) {
  if (lex.empty()) return fallback;
  return {lex.begin(), lex.end()};
}

std::string fill(const std::string& tmpl, const std::map<std::string, const std::vector<std::string>*>& pools,
                 std::mt19937_64& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close == std::string::npos) throw Error(ErrorCode::InvalidSpec, "unclosed marker in '" + tmpl + "'");
      const std::string name = tmpl.substr(i + 1, close - i - 1);
      auto it = pools.find(name);
      if (it == pools.end()) throw Error(ErrorCode::InvalidSpec, "unknown marker {" + name + "}");
      const auto& pool = *it->second;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      out += pool[pick(rng)];
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

proto::Vector unit_gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  proto::Vector v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = g(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_classes < 2) throw Error(ErrorCode::InvalidSpec, "n_classes must be >= 2");
  if (n_per_class < 1) throw Error(ErrorCode::InvalidSpec, "n_per_class must be >= 1");
  if (!classes.empty() && classes.size() != n_classes) {
    throw Error(ErrorCode::InvalidSpec, "templates given for " + std::to_string(classes.size()) +
                                            " classes but n_classes is " + std::to_string(n_classes));
  }
  for (const auto& c : classes) {
    if (c.templates.empty()) {
      throw Error(ErrorCode::InvalidSpec, "class " + canonical_key_string(c.key) + " has no templates");
    }
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw Error(ErrorCode::InvalidSpec, "accuracy outside [0,1]");
  // an argmax over K classes with calibrated scores cannot be right less than 1/K of the time
  if (accuracy < 1.0 / static_cast<double>(n_classes)) {
    throw Error(ErrorCode::InvalidSpec, "accuracy below 1/n_classes is not realizable");
  }
  if (!(scale >= 1.0 && std::isfinite(scale))) throw Error(ErrorCode::InvalidSpec, "scale must be >= 1");
  if (!(concentration > 0.0)) throw Error(ErrorCode::InvalidSpec, "concentration must be > 0");
  if (dim < 2) throw Error(ErrorCode::InvalidSpec, "dim must be >= 2");
  if (!(separation >= 0.0)) throw Error(ErrorCode::InvalidSpec, "separation must be >= 0");
  if (fit_per_class < 1) throw Error(ErrorCode::InvalidSpec, "fit_per_class must be >= 1");
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& file) {
  SyntheticSpec s;
  try {
    const YAML::Node root = YAML::LoadFile(file.string());
    static const std::set<std::string> known{"n_classes",  "n_per_class", "accuracy", "confidence_model",
                                             "scale",      "concentration", "dim",    "separation",
                                             "fit_per_class", "seed",      "templates"};
    for (const auto& kv : root) {
      const auto name = kv.first.as<std::string>();
      if (!known.contains(name)) throw Error(ErrorCode::InvalidSpec, "unknown synthetic spec field '" + name + "'");
    }
    if (root["n_classes"]) s.n_classes = root["n_classes"].as<std::size_t>();
    if (root["n_per_class"]) s.n_per_class = root["n_per_class"].as<std::size_t>();
    if (root["accuracy"]) s.accuracy = root["accuracy"].as<double>();
    if (root["confidence_model"]) {
      const auto m = root["confidence_model"].as<std::string>();
      if (m == "calibrated") {
        s.confidence_model = ConfidenceModel::calibrated;
      } else if (m == "overconfident") {
        s.confidence_model = ConfidenceModel::overconfident;
      } else {
        throw Error(ErrorCode::InvalidSpec, "confidence_model must be calibrated or overconfident");
      }
    }
    if (root["scale"]) s.scale = root["scale"].as<double>();
    if (root["concentration"]) s.concentration = root["concentration"].as<double>();
    if (root["dim"]) s.dim = root["dim"].as<std::size_t>();
    if (root["separation"]) s.separation = root["separation"].as<double>();
    if (root["fit_per_class"]) s.fit_per_class = root["fit_per_class"].as<std::size_t>();
    if (root["seed"]) s.seed = root["seed"].as<std::uint64_t>();
    if (const auto t = root["templates"]) {
      for (const auto& kv : t) {
        s.classes.push_back({parse_cache_key(kv.first.as<std::string>()),
                             kv.second.as<std::vector<std::string>>()});
      }
      if (!root["n_classes"]) s.n_classes = s.classes.size();
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::InvalidSpec, "bad synthetic spec " + file.string() + ": " + e.what());
  }
  return s;
}

std::vector<ClassTemplates> default_classes(std::size_t n_classes) {
  std::vector<ClassTemplates> out{
      {CacheKey("check", "weather"),
       {"what is the weather {when}", "weather forecast for {when}", "will it rain {when}"}},
      {CacheKey("check", "email"),
       {"check email from {who}", "any new mail from {who}", "show messages from {who} in my inbox"}},
      {CacheKey("send", "email"),
       {"send an email to {who}", "write an email to {who} about the budget", "email {who} the notes"}},
      {CacheKey("check", "stock"),
       {"what is {ticker} trading at", "stock price of {ticker}", "how is {ticker} doing {when}"}},
      {CacheKey("set", "reminder"),
       {"remind me {when} to call {who}", "set a reminder for {when}", "reminder at {when} about rent"}},
      {CacheKey("transfer", "money"),
       {"send {how_much} dollars to {who}", "transfer {how_much} to {who}", "pay {who} {how_much} dollars"}},
      {CacheKey("book", "meeting"),
       {"schedule a meeting with {who} {when}", "book time with {who} {when}", "set up a call with {who}"}},
      {CacheKey("play", "music"),
       {"play some jazz", "put on music for {when}", "play my workout playlist"}},
  };
  out.resize(std::min(out.size(), n_classes), out.front());
  for (std::size_t i = out.size(); i < n_classes; ++i) {
    const auto n = std::to_string(i);
    out.push_back({CacheKey("task" + n, "item" + n),
                   {"run task " + n + " for {who}", "start job " + n + " {when}"}});
  }
  return out;
}

SyntheticCorpus generate(const SyntheticSpec& spec, const fingerprint::Lexicons& lexicons) {
  spec.validate();
  const auto classes = spec.classes.empty() ? default_classes(spec.n_classes) : spec.classes;
  const std::size_t k = classes.size();

  const auto names = pool_or(lexicons.names, kNames);
  const auto tickers = pool_or(lexicons.tickers, kTickers);
  const std::map<std::string, const std::vector<std::string>*> pools{
      {"who", &names}, {"when", &kTimes}, {"how_much", &kAmounts}, {"ticker", &tickers}};

  // independent streams, so changing one knob leaves the other draws alone
  auto text_rng = stream(spec.seed, 1);
  auto center_rng = stream(spec.seed, 2);
  auto noise_rng = stream(spec.seed, 3);
  auto pred_rng = stream(spec.seed, 4);
  auto order_rng = stream(spec.seed, 5);

  struct Item {
    std::size_t cls;
    std::size_t j;
  };
  std::vector<Item> items;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < spec.n_per_class; ++j) items.push_back({c, j});
  }
  std::shuffle(items.begin(), items.end(), order_rng);

  std::vector<proto::Vector> centers;
  for (std::size_t c = 0; c < k; ++c) centers.push_back(unit_gaussian(spec.dim, center_rng));

  risk::ConfidenceGenerator gen{spec.accuracy, k, spec.concentration,
                                spec.confidence_model == ConfidenceModel::overconfident ? spec.scale : 1.0};
  gen.validate();

  proto::EmbeddingTable table(spec.dim);
  std::vector<Query> dataset;
  std::vector<PredictionRecord> preds;
  std::vector<std::pair<std::string, CacheKey>> fit_examples;
  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(spec.dim)));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  char id[32];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& [cls, j] = items[i];
    const auto& tc = classes[cls];
    std::snprintf(id, sizeof id, "s%06zu", i);

    std::uniform_int_distribution<std::size_t> pick_t(0, tc.templates.size() - 1);
    Query q{id, fill(tc.templates[pick_t(text_rng)], pools, text_rng), "en",
            IntentLabel(canonical_key_string(tc.key))};
    q.validate();

    proto::Vector v(spec.dim);
    double n2 = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      v[d] = spec.separation * centers[cls][d] + noise(noise_rng);
      n2 += v[d] * v[d];
    }
    const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (auto& x : v) x *= inv;
    table.insert(q.id, v);
    if (j < spec.fit_per_class) fit_examples.emplace_back(q.id, tc.key);

    const double p = gen.draw_p(pred_rng);
    const bool correct = u01(pred_rng) < p;
    std::size_t predicted = cls;
    if (!correct) {
      std::uniform_int_distribution<std::size_t> other(0, k - 2);
      predicted = other(pred_rng);
      if (predicted >= cls) ++predicted;
    }
    const double conf = gen.report(p);
    ClassScores scores;
    const double rest = (1.0 - conf) / static_cast<double>(k - 1);
    for (std::size_t c = 0; c < k; ++c) scores.emplace(classes[c].key, c == predicted ? conf : rest);
    PredictionRecord r{q.id, classes[predicted].key, conf, std::move(scores)};
    r.validate();
    preds.push_back(std::move(r));
    dataset.push_back(std::move(q));
  }

  auto model = proto::fit_centroids(fit_examples, table);
  return SyntheticCorpus{std::move(dataset), std::move(table), std::move(preds), std::move(model)};
}

proto::Vector embed_text(const Query& query, const fingerprint::Lexicons& lexicons, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::Validation, "embedding dim must be >= 2");
  const auto fp = fingerprint::fingerprint(query, lexicons);
  proto::Vector v(dim, 0.0);
  auto add = [&](std::string_view feature, double weight) {
    const auto h = fingerprint::fnv1a64(feature);
    v[h % dim] += (h >> 63) ? -weight : weight;
  };
  std::istringstream ss(fp.tmpl.text);
  std::string tok;
  std::string prev;
  while (ss >> tok) {
    if (!kFunctionWords.contains(tok)) add(tok, 1.0);
    if (!prev.empty()) add(prev + " " + tok, 0.5);
    prev = tok;
  }
  add("<bias>", 0.1);  // keeps all-stopword queries off the zero vector
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 == 0.0) v[0] = 1.0, n2 = 1.0;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

proto::EmbeddingTable embed_dataset(std::span<const Query> dataset, const fingerprint::Lexicons& lexicons,
                                    std::size_t dim) {
  proto::EmbeddingTable table(dim);
  for (const auto& q : dataset) table.insert(q.id, embed_text(q, lexicons, dim));
  return table;
}

}  // namespace canoncache::synthetic
