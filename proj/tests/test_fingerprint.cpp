#include <doctest.h>

#include <map>
#include <set>

#include "canoncache/fingerprint.hpp"
#include "canoncache/io.hpp"
#include "test_paths.hpp"

using namespace canoncache;
using namespace canoncache::fingerprint;

namespace {

const Lexicons& lex() {
  static const Lexicons l = Lexicons::load(test_paths::lexicons());
  return l;
}

FingerprintResult fp(const std::string& text) { return fingerprint::fingerprint(Query{"x", text}, lex()); }

std::vector<std::pair<EntityKind, std::string>> entities(const std::string& text) {
  return fp(text).tmpl.entities;
}

}  // namespace

TEST_CASE("FNV-1a 64 published vectors") {
  static_assert(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64("check email from <PERSON>") == 0xe7548c6642ca7b46ULL);
}

TEST_CASE("normalization matches NFKC reference vectors") {
  // expected strings frozen from Python's unicodedata NFKC + str.lower
  const std::vector<std::pair<std::string, std::string>> cases{
      {"\xEF\xBC\xA3\xEF\xBC\xA8\xEF\xBC\xA5\xEF\xBC\xA3\xEF\xBC\xAB \xEF\xBC\xA5\xEF\xBD\x8D\xEF\xBD\x81\xEF\xBD\x89"
       "\xEF\xBD\x8C",
       "check email"},
      {"\xEF\xAC\x81le the report", "file the report"},
      {"Caf\xC3\xA9  au   lait!", "caf\xC3\xA9 au lait"},
      {"\xE2\x91\xA0\xE2\x91\xA1\xE2\x91\xA2 items?", "123 items"},
      {"  Hello\tWorld.  ", "hello world"},
      {"Stra\xC3\x9F" "e", "stra\xC3\x9F" "e"},
      {"\xC3\x85NGSTR\xC3\x96M", "\xC3\xA5ngstr\xC3\xB6m"},
      {"x\xC2\xB2+y\xC2\xB2", "x2+y2"},
      {"\xE2\x80\xA6" "done!!", "...done"},
      {"\xEF\xBC\xAE\xEF\xBD\x8F\xEF\xBC\x8E\xEF\xBC\x95", "no.5"},
  };
  for (const auto& [in, out] : cases) {
    CAPTURE(in);
    CHECK(normalize_text(in) == out);
  }
  try {
    normalize_text("  ?! ");
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyInput);
  }
}

TEST_CASE("entity detection") {
  using K = EntityKind;
  CHECK(entities("remind me at 5pm to call bob") ==
        std::vector<std::pair<K, std::string>>{{K::DATETIME, "5pm"}, {K::PERSON, "bob"}});
  CHECK(entities("what is NVDA trading at") == std::vector<std::pair<K, std::string>>{{K::TICKER, "nvda"}});
  CHECK(entities("send $50 to Bob") ==
        std::vector<std::pair<K, std::string>>{{K::NUMBER, "$50"}, {K::PERSON, "bob"}});
  CHECK(entities("open https://example.com/a?b=1 now") ==
        std::vector<std::pair<K, std::string>>{{K::URL, "https://example.com/a?b=1"}});
  CHECK(entities("mail alice@example.com today") ==
        std::vector<std::pair<K, std::string>>{{K::EMAIL_ADDR, "alice@example.com"}, {K::DATETIME, "today"}});
  CHECK(entities("search for \"bob 5pm\" please") ==
        std::vector<std::pair<K, std::string>>{{K::QUOTED, "bob 5pm"}});
  // cue-word rule: an unknown capitalized name after "with"
  CHECK(entities("lunch with zanele") == std::vector<std::pair<K, std::string>>{{K::PERSON, "zanele"}});
  // stopwords after a cue are not names
  CHECK(entities("set up a call with the team").empty());
  // possessive stripped
  CHECK(entities("read alice's notes") == std::vector<std::pair<K, std::string>>{{K::PERSON, "alice"}});
}

TEST_CASE("parameter extraction: first occurrence per slot wins") {
  const auto r = fp("pay bob 20 and carol 30");
  CHECK(r.params.get(Slot::who) == "bob");
  CHECK(r.params.get(Slot::how_much) == "20");
  CHECK_FALSE(r.params.get(Slot::when).has_value());
}

TEST_CASE("templatize rejects bad spans") {
  const std::string text = "call bob now";
  const std::vector<EntitySpan> overlap{{5, 8, EntityKind::PERSON}, {6, 12, EntityKind::DATETIME}};
  try {
    templatize(text, overlap);
    FAIL("expected OverlappingSpans");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OverlappingSpans);
  }
  const std::vector<EntitySpan> out_of_range{{5, 40, EntityKind::PERSON}};
  CHECK_THROWS_AS(templatize(text, out_of_range), Error);
  const std::vector<EntitySpan> ok{{5, 8, EntityKind::PERSON}};
  CHECK(templatize(text, ok).text == "call <PERSON> now");
}

TEST_CASE("parameter variants share a hash, action variants do not") {
  CHECK(fp("Check email from Alice").fingerprint == fp("check email from bob").fingerprint);
  CHECK(fp("Check email from Alice").fingerprint.template_text == "check email from <PERSON>");
  CHECK(fp("What's the weather tomorrow?").fingerprint == fp("what's the weather tonight").fingerprint);
  CHECK(fp("Send $50 to Bob").fingerprint == fp("send 20 to carol.").fingerprint);
  CHECK_FALSE(fp("check email from alice").fingerprint == fp("send email to alice").fingerprint);
  CHECK_FALSE(fp("send email to alice").fingerprint == fp("send $5 to alice").fingerprint);
}

TEST_CASE("mini-corpus: same template implies same intent") {
  const auto ds = io::read_dataset(test_paths::minicorpus() / "dataset.jsonl");
  std::map<std::uint64_t, std::set<std::string>> intents_by_hash;
  std::map<std::uint64_t, int> size;
  for (const auto& q : ds) {
    const auto r = fingerprint::fingerprint(q, lex());
    intents_by_hash[r.fingerprint.hash].insert(q.true_intent->str());
    ++size[r.fingerprint.hash];
  }
  int shared = 0;
  for (const auto& [h, s] : intents_by_hash) {
    CHECK(s.size() == 1);
    shared += size[h] > 1 ? 1 : 0;
  }
  CHECK(shared >= 5);
}

TEST_CASE("lexicon files") {
  CHECK(lex().names.contains("alice"));
  CHECK(lex().tickers.contains("nvda"));
  CHECK(lex().stopwords.contains("call"));
  CHECK_THROWS_AS(Lexicons::load(test_paths::source() / "no-such-dir"), Error);
}
