#include "canoncache/fingerprint.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <regex>

namespace canoncache::fingerprint {

std::string_view kind_name(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::URL: return "URL";
    case EntityKind::EMAIL_ADDR: return "EMAIL_ADDR";
    case EntityKind::QUOTED: return "QUOTED";
    case EntityKind::DATETIME: return "DATETIME";
    case EntityKind::NUMBER: return "NUMBER";
    case EntityKind::TICKER: return "TICKER";
    case EntityKind::PERSON: return "PERSON";
  }
  return "";
}

std::set<std::string, std::less<>> Lexicons::read_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open lexicon " + file.string());
  std::set<std::string, std::less<>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string token = line.substr(first, last - first + 1);
    std::transform(token.begin(), token.end(), token.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    out.insert(std::move(token));
  }
  return out;
}

Lexicons Lexicons::load(const std::filesystem::path& dir) {
  Lexicons lex;
  lex.names = read_list(dir / "names.txt");
  lex.tickers = read_list(dir / "tickers.txt");
  lex.stopwords = read_list(dir / "stopwords.txt");
  return lex;
}

std::string normalize_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::Io, "ICU NFKC normalizer unavailable");

  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = nfkc->normalize(source, status);
  if (U_FAILURE(status)) throw Error(ErrorCode::Validation, "NFKC normalization failed");
  normalized.toLower(icu::Locale::getRoot());

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 cp = normalized.char32At(i);
    i += U16_LENGTH(cp);
    if (u_isUWhiteSpace(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && collapsed.length() > 0) collapsed.append(static_cast<UChar>(' '));
    pending_space = false;
    collapsed.append(cp);
  }

  std::string out;
  collapsed.toUTF8String(out);
  while (!out.empty() && (out.back() == '.' || out.back() == '?' || out.back() == '!' ||
                          out.back() == ' ')) {
    out.pop_back();
  }
  if (out.empty()) throw Error(ErrorCode::EmptyInput, "text is empty after normalization");
  return out;
}

namespace {

struct Token {
  std::size_t start;
  std::size_t end;
  std::string_view core;
};

constexpr std::string_view kEdgePunct = ".,;:!?()[]{}\"'";

// Whitespace-delimited tokens with surrounding punctuation trimmed off.
std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ') ++end;
    std::size_t s = pos;
    std::size_t e = end;
    while (s < e && kEdgePunct.find(text[s]) != std::string_view::npos) ++s;
    while (e > s && kEdgePunct.find(text[e - 1]) != std::string_view::npos) --e;
    if (s < e) tokens.push_back({s, e, text.substr(s, e - s)});
    pos = end;
  }
  return tokens;
}

bool is_alpha_word(std::string_view word) {
  return !word.empty() && std::all_of(word.begin(), word.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || ch == '-';
  });
}

bool has_digit(std::string_view word) {
  return std::any_of(word.begin(), word.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

// "alice's" names alice
std::string_view strip_possessive(std::string_view word) {
  if (word.size() > 2 && word.ends_with("'s")) return word.substr(0, word.size() - 2);
  return word;
}

struct Candidate {
  std::size_t start;
  std::size_t end;
};

void regex_candidates(std::string_view text, const std::regex& re, int group,
                      std::vector<Candidate>& out) {
  const std::string owned(text);
  for (auto it = std::sregex_iterator(owned.begin(), owned.end(), re);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (!m[group].matched || m.length(group) == 0) continue;
    const auto start = static_cast<std::size_t>(m.position(group));
    out.push_back({start, start + static_cast<std::size_t>(m.length(group))});
  }
}

const std::regex& url_re() {
  static const std::regex re(R"((?:https?://|www\.)[^\s"]*[^\s".,;:!?)\]])");
  return re;
}
const std::regex& email_re() {
  static const std::regex re(R"([a-z0-9._%+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,})");
  return re;
}
const std::regex& quoted_ascii_re() {
  static const std::regex re(R"XX("([^"]+)")XX");
  return re;
}
const std::regex& quoted_curly_re() {
  static const std::regex re("\xE2\x80\x9C((?:(?!\xE2\x80\x9D).)+)\xE2\x80\x9D");
  return re;
}
const std::array<std::regex, 4>& datetime_res() {
  static const std::array<std::regex, 4> res = {
      std::regex(R"(\b\d{1,2}(?::\d{2})? ?(?:am|pm)\b)"),
      std::regex(R"(\b\d{1,2}:\d{2}\b)"),
      std::regex(R"(\b(?:monday|tuesday|wednesday|thursday|friday|saturday|sunday)\b)"),
      std::regex(R"(\b(?:today|tomorrow|tonight)\b)"),
  };
  return res;
}

constexpr std::array<std::string_view, 4> kPersonCues = {"from", "to", "with", "for"};

}  // namespace

std::vector<EntitySpan> extract_entities(std::string_view text, const Lexicons& lexicons) {
  const auto tokens = tokenize(text);

  std::array<std::vector<Candidate>, 7> by_kind;
  auto& urls = by_kind[static_cast<int>(EntityKind::URL)];
  auto& emails = by_kind[static_cast<int>(EntityKind::EMAIL_ADDR)];
  auto& quoted = by_kind[static_cast<int>(EntityKind::QUOTED)];
  auto& datetimes = by_kind[static_cast<int>(EntityKind::DATETIME)];
  auto& numbers = by_kind[static_cast<int>(EntityKind::NUMBER)];
  auto& tickers = by_kind[static_cast<int>(EntityKind::TICKER)];
  auto& persons = by_kind[static_cast<int>(EntityKind::PERSON)];

  regex_candidates(text, url_re(), 0, urls);
  regex_candidates(text, email_re(), 0, emails);
  regex_candidates(text, quoted_ascii_re(), 1, quoted);
  regex_candidates(text, quoted_curly_re(), 1, quoted);
  for (const auto& re : datetime_res()) regex_candidates(text, re, 0, datetimes);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& tok = tokens[i];
    if (has_digit(tok.core)) numbers.push_back({tok.start, tok.end});
    if (tok.core.size() >= 2 && tok.core.size() <= 5 && is_alpha_word(tok.core) &&
        lexicons.tickers.contains(tok.core)) {
      tickers.push_back({tok.start, tok.end});
    }
    const std::string_view word = strip_possessive(tok.core);
    if (!is_alpha_word(word)) continue;
    bool person = lexicons.names.contains(word);
    if (!person && i > 0 && !lexicons.stopwords.contains(word)) {
      const auto prev = tokens[i - 1].core;
      person = std::find(kPersonCues.begin(), kPersonCues.end(), prev) != kPersonCues.end();
    }
    if (person) persons.push_back({tok.start, tok.start + word.size()});
  }

  std::vector<EntitySpan> accepted;
  for (std::size_t k = 0; k < by_kind.size(); ++k) {
    auto& cands = by_kind[k];
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.start != b.start ? a.start < b.start : a.end > b.end;
    });
    for (const Candidate& c : cands) {
      const bool clash = std::any_of(accepted.begin(), accepted.end(), [&](const EntitySpan& s) {
        return c.start < s.end && s.start < c.end;
      });
      if (!clash) accepted.push_back({c.start, c.end, static_cast<EntityKind>(k)});
    }
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return accepted;
}

Template templatize(std::string_view text, std::span<const EntitySpan> spans) {
  std::vector<EntitySpan> ordered(spans.begin(), spans.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });

  Template out;
  std::size_t cursor = 0;
  for (const EntitySpan& span : ordered) {
    if (span.start >= span.end || span.end > text.size()) {
      throw Error(ErrorCode::Validation, "entity span out of range");
    }
    if (span.start < cursor) throw Error(ErrorCode::OverlappingSpans, "entity spans overlap");
    out.text.append(text.substr(cursor, span.start - cursor));
    out.text += '<';
    out.text += kind_name(span.kind);
    out.text += '>';
    out.entities.emplace_back(span.kind, std::string(text.substr(span.start, span.end - span.start)));
    cursor = span.end;
  }
  out.text.append(text.substr(cursor));
  return out;
}

Fingerprint template_hash(const Template& tmpl) {
  return {fnv1a64(tmpl.text), tmpl.text};
}

FingerprintResult fingerprint(const Query& query, const Lexicons& lexicons) {
  const std::string normalized = normalize_text(query.text);
  const auto spans = extract_entities(normalized, lexicons);
  Template tmpl = templatize(normalized, spans);

  ParamSet params;
  for (const auto& [kind, surface] : tmpl.entities) {
    switch (kind) {
      case EntityKind::PERSON:
      case EntityKind::TICKER: params.set_if_absent(Slot::who, surface); break;
      case EntityKind::DATETIME: params.set_if_absent(Slot::when, surface); break;
      case EntityKind::NUMBER: params.set_if_absent(Slot::how_much, surface); break;
      default: break;
    }
  }
  Fingerprint fp = template_hash(tmpl);
  return {std::move(fp), std::move(params), std::move(tmpl)};
}

}  // namespace canoncache::fingerprint
