#pragma once

// Tier 0: normalize a query, mask typed entities, hash the template.
//
// Parameter variants of one request ("check email from alice" / "... from bob")
// collapse to the same template and hash; action variants ("send email to
// alice") keep distinct text and therefore distinct hashes.

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canoncache/core.hpp"

namespace canoncache::fingerprint {

// Declaration order is overlap precedence, highest first.
enum class EntityKind { URL, EMAIL_ADDR, QUOTED, DATETIME, NUMBER, TICKER, PERSON };

std::string_view kind_name(EntityKind kind) noexcept;

struct EntitySpan {
  std::size_t start = 0;  // byte offsets into the normalized text
  std::size_t end = 0;
  EntityKind kind = EntityKind::PERSON;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

struct Template {
  std::string text;
  std::vector<std::pair<EntityKind, std::string>> entities;
};

struct Fingerprint {
  std::uint64_t hash = 0;
  std::string template_text;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// Token lists backing rule-based entity detection. All entries lowercase.
struct Lexicons {
  std::set<std::string, std::less<>> names;
  std::set<std::string, std::less<>> tickers;
  std::set<std::string, std::less<>> stopwords;

  /// Reads names.txt, tickers.txt and stopwords.txt from `dir`.
  static Lexicons load(const std::filesystem::path& dir);
  /// One token per line; blank lines and `#` comments skipped.
  static std::set<std::string, std::less<>> read_list(const std::filesystem::path& file);
};

/// NFKC, lowercase, collapse whitespace, trim, strip trailing `.?!`.
std::string normalize_text(std::string_view text);

std::vector<EntitySpan> extract_entities(std::string_view normalized, const Lexicons& lexicons);

Template templatize(std::string_view normalized, std::span<const EntitySpan> spans);

constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= kFnvPrime;
  }
  return h;
}

Fingerprint template_hash(const Template& tmpl);

struct FingerprintResult {
  Fingerprint fingerprint;
  ParamSet params;
  Template tmpl;
};

FingerprintResult fingerprint(const Query& query, const Lexicons& lexicons);

}  // namespace canoncache::fingerprint
