#include <doctest.h>

#include <fstream>
#include <random>

#include "canoncache/cascade.hpp"
#include "canoncache/io.hpp"
#include "canoncache/synthetic.hpp"
#include "test_paths.hpp"

using namespace canoncache;
using namespace canoncache::cascade;

namespace {

const fingerprint::Lexicons& lex() {
  static const fingerprint::Lexicons l = fingerprint::Lexicons::load(test_paths::lexicons());
  return l;
}

Query labeled(std::string id, std::string text, const std::string& intent) {
  Query q{std::move(id), std::move(text)};
  q.true_intent = IntentLabel(intent);
  return q;
}

EngineConfig config(bool t0, double tau2) {
  EngineConfig c;
  c.tiers[0].enabled = t0;
  c.tiers[2].threshold = tau2;
  return c;
}

// classifier that always answers with a fixed key and confidence
class Fixed : public Classifier {
 public:
  Fixed(CacheKey k, double c) : key_(std::move(k)), conf_(c) {}
  std::optional<PredictionRecord> predict(const Query& q) const override {
    return PredictionRecord{q.id, key_, conf_, std::nullopt};
  }

 private:
  CacheKey key_;
  double conf_;
};

}  // namespace

TEST_CASE("parameter injection") {
  const CacheKey k("check", "email");
  ParamSet p;
  p.set_if_absent(Slot::who, "bob");
  auto plan = inject_params(PlanTemplate{k, {"open_mail({who})"}}, p);
  CHECK(plan.steps == std::vector<std::string>{"open_mail(bob)"});
  CHECK(plan.complete());

  plan = inject_params(PlanTemplate{k, {"open_mail({who})", "at({when})", "again({when})"}}, ParamSet{});
  CHECK(plan.steps[0] == "open_mail(<missing:who>)");
  CHECK(plan.missing == std::vector<std::string>{"who", "when"});

  p.set_if_absent(Slot::how_much, "$5");
  plan = inject_params(PlanTemplate{k, {"pay({who}, {how_much}) {who}"}}, p);
  CHECK(plan.steps[0] == "pay(bob, $5) bob");
  CHECK_THROWS_AS((PlanTemplate{k, {"x({where})"}}.validate()), Error);
}

TEST_CASE("parameter variant is served from tier 0 with its own parameters") {
  Engine e(lex(), config(true, 0.25));
  auto lib = std::make_shared<PlanLibrary>();
  const CacheKey k("check", "email");
  lib->emplace(k, PlanTemplate{k, {"open_mail({who})"}});
  e.set_cheap_resolver(oracle_resolver(lib));

  const auto first = e.route(labeled("1", "Check email from Alice", "check:email"));
  CHECK(first.resolved_tier == 3);
  CHECK_FALSE(first.was_cache_hit);
  const auto second = e.route(labeled("2", "Check email from Bob", "check:email"));
  CHECK(second.resolved_tier == 0);
  CHECK(second.was_cache_hit);
  CHECK(second.key == k);
  CHECK(second.plan->steps == std::vector<std::string>{"open_mail(bob)"});
  CHECK(e.cache().entries().at(0).hit_count == 1);
}

TEST_CASE("threshold above one abstains at the classifier tiers") {
  Engine e(lex(), config(false, 1.01));
  const CacheKey k("check", "email");
  e.set_classifier(2, std::make_shared<Fixed>(k, 1.0));
  e.warm(PlanLibrary{{k, default_plan(k)}});
  e.set_cheap_resolver(oracle_resolver(nullptr));
  for (int i = 0; i < 20; ++i) {
    const auto r = e.route(labeled(std::to_string(i), "check email " + std::to_string(i), "check:email"));
    CHECK(r.resolved_tier == 3);
  }
}

TEST_CASE("confident key without a cached plan falls through") {
  Engine e(lex(), config(false, 0.0));
  e.set_classifier(2, std::make_shared<Fixed>(CacheKey("a", "b"), 0.9));
  e.set_cheap_resolver(oracle_resolver(nullptr));
  const auto r = e.route(labeled("1", "hello there", "c:d"));
  CHECK(r.resolved_tier == 3);
  CHECK(r.key == CacheKey("c", "d"));
}

TEST_CASE("every query resolves at exactly one tier") {
  const auto ds = io::read_dataset(test_paths::minicorpus() / "dataset.jsonl");
  // 0.6 sits below the threshold, so tier 2 always abstains
  Engine e(lex(), config(true, 0.7));
  e.set_classifier(2, std::make_shared<Fixed>(CacheKey("check", "weather"), 0.6));
  e.set_cheap_resolver([](const Query& q) -> std::optional<ResolverAnswer> {
    if (q.id.back() % 3 == 0) return std::nullopt;  // cheap tier declines some
    const auto k = *q.true_intent->as_key();
    return ResolverAnswer{k, default_plan(k)};
  });
  e.set_deep_resolver(stub_resolver(0, std::make_shared<fingerprint::Lexicons>(lex())));
  const auto res = simulate(ds, e);
  CHECK(res.resolutions.size() == ds.size());
  std::uint64_t sum = 0;
  for (auto c : res.stats.per_tier) sum += c;
  CHECK(sum == ds.size());
  CHECK(res.stats.per_tier[4] > 0);
  for (const auto& r : res.resolutions) {
    CHECK(r.key.has_value());
    CHECK(r.plan.has_value());
    CHECK(r.was_cache_hit == (r.resolved_tier <= 2));
  }
}

TEST_CASE("no resolver available") {
  Engine e(lex(), config(true, 0.25));
  try {
    e.route(Query{"1", "something new"});
    FAIL("expected ResolverUnavailable");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ResolverUnavailable);
  }
}

TEST_CASE("coverage is monotone non-increasing in the tier-2 threshold") {
  synthetic::SyntheticSpec s;
  s.n_per_class = 60;
  s.accuracy = 0.8;
  const auto corpus = synthetic::generate(s);
  auto replay = std::make_shared<ReplayClassifier>(corpus.predictions);
  PlanLibrary lib;
  for (const auto& q : corpus.dataset) {
    const auto k = *q.true_intent->as_key();
    lib.emplace(k, default_plan(k));
  }
  double prev = 2.0;
  for (double tau : {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.99, 1.0, 1.01}) {
    Engine e(lex(), config(false, tau));
    e.set_classifier(2, replay);
    e.warm(lib);
    e.set_cheap_resolver(oracle_resolver(nullptr));
    const auto res = simulate(corpus.dataset, e);
    const double cov = res.stats.coverage();
    CHECK(cov <= prev);
    prev = cov;
    if (auto safe = res.stats.safety()) CHECK(*res.stats.unsafe_rate() == doctest::Approx(1.0 - *safe));
  }
  CHECK(prev == 0.0);
}

TEST_CASE("tier-3 answers populate the cache and the retraining pool") {
  const auto pool_path = test_paths::scratch() / "pool_test.jsonl";
  auto pool = std::make_shared<RetrainingPool>(pool_path, true);
  Engine e(lex(), config(true, 0.25));
  e.set_retraining_pool(pool);
  e.set_cheap_resolver(oracle_resolver(nullptr));
  const std::vector<Query> qs{labeled("1", "play some jazz", "play:music"),
                              labeled("2", "transfer $5 to bob", "transfer:money"),
                              labeled("3", "set a reminder at 5pm", "set:reminder")};
  for (const auto& q : qs) CHECK(e.route(q).resolved_tier == 3);
  CHECK(pool->appended() == 3);
  std::ifstream in(pool_path);
  std::string line;
  std::vector<std::string> keys;
  while (std::getline(in, line)) keys.push_back(nlohmann::json::parse(line).at("key"));
  CHECK(keys == std::vector<std::string>{"play:music", "transfer:money", "set:reminder"});
  for (const auto& k : keys) CHECK(e.cache().contains(parse_cache_key(k)));
  // re-truncation empties the file
  RetrainingPool again(pool_path, true);
  CHECK(std::filesystem::file_size(pool_path) == 0);
}

TEST_CASE("stub resolver derives a key from the fingerprint") {
  const auto r = stub_resolver(0, std::make_shared<fingerprint::Lexicons>(lex()));
  const auto a = r(Query{"1", "check email from alice"});
  const auto b = r(Query{"2", "Check email from Bob"});
  REQUIRE(a);
  CHECK(a->key == b->key);
  CHECK(a->key.action() == "stub");
}

TEST_CASE("engine config validation") {
  EngineConfig c;
  c.tiers[2].threshold = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c.tiers[2].threshold = 0.2;
  c.tiers[3].tier_id = 7;
  CHECK_THROWS_AS(c.validate(), Error);
  Engine e(lex(), EngineConfig{});
  CHECK_THROWS_AS(e.set_classifier(3, nullptr), Error);
}

TEST_CASE("parallel precompute matches per-query prediction") {
  synthetic::SyntheticSpec s;
  s.n_per_class = 40;
  const auto corpus = synthetic::generate(s);
  auto table = std::make_shared<proto::EmbeddingTable>(corpus.embeddings);
  Engine e(lex(), config(false, 0.25));
  auto clf = std::make_shared<PrototypeClassifier>(corpus.model, table);
  e.set_classifier(2, clf);
  const auto pre = e.precompute(corpus.dataset);
  for (std::size_t i = 0; i < corpus.dataset.size(); ++i) {
    const auto one = clf->predict(corpus.dataset[i]);
    REQUIRE(pre[i].tier2);
    CHECK(pre[i].tier2->predicted_key == one->predicted_key);
    CHECK(pre[i].tier2->confidence == one->confidence);
  }
}
