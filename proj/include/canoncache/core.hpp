#pragma once

#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace canoncache {

enum class ErrorCode {
  Validation,
  EmptyInput,
  OverlappingSpans,
  MissingEmbedding,
  SingleClass,
  DimensionMismatch,
  ZeroVector,
  ResolverUnavailable,
  LengthMismatch,
  InvalidParams,
  SharesInvalid,
  NoCoverage,
  InvalidSpec,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every library failure carries a code so the CLI can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True when `token` matches `[a-z][a-z0-9_]*`.
bool is_canonical_token(std::string_view token) noexcept;

/// The (action, target) pair a plan template is cached under.
class CacheKey {
 public:
  /// Throws Error{Validation} unless both tokens are canonical.
  CacheKey(std::string action, std::string target);

  const std::string& action() const noexcept { return action_; }
  const std::string& target() const noexcept { return target_; }

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
  friend std::strong_ordering operator<=>(const CacheKey& a, const CacheKey& b);

 private:
  std::string action_;
  std::string target_;
};

/// `action + ":" + target`. Injective because ':' is outside the token alphabet.
std::string canonical_key_string(const CacheKey& key);

/// Inverse of canonical_key_string; throws Error{Validation} on malformed input.
CacheKey parse_cache_key(std::string_view text);

// Orders keys by their canonical string, which is also the classifier tie-break order.
struct CanonicalOrder {
  bool operator()(const CacheKey& a, const CacheKey& b) const { return a < b; }
};

/// Ground-truth intent: a canonical token or a canonical key string.
class IntentLabel {
 public:
  explicit IntentLabel(std::string label);

  const std::string& str() const noexcept { return label_; }
  /// The label read as a cache key, when it has the `action:target` form.
  std::optional<CacheKey> as_key() const;
  bool matches(const CacheKey& key) const { return label_ == canonical_key_string(key); }

  friend bool operator==(const IntentLabel&, const IntentLabel&) = default;
  friend auto operator<=>(const IntentLabel&, const IntentLabel&) = default;

 private:
  std::string label_;
};

struct Query {
  std::string id;
  std::string text;
  std::string language = "en";
  std::optional<IntentLabel> true_intent;

  /// Throws Error{Validation} on an empty id or blank text.
  void validate() const;
};

enum class Slot { who, when, how_much };

std::string_view slot_name(Slot slot) noexcept;
std::optional<Slot> parse_slot(std::string_view name) noexcept;

/// Parameters extracted apart from the cache key and injected into plans later.
class ParamSet {
 public:
  /// Keeps the first value per slot; returns false when the slot was already set.
  bool set_if_absent(Slot slot, std::string value);
  std::optional<std::string> get(Slot slot) const;
  bool empty() const noexcept { return slots_.empty(); }
  std::size_t size() const noexcept { return slots_.size(); }
  const std::map<Slot, std::string>& slots() const noexcept { return slots_; }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::map<Slot, std::string> slots_;
};

using ClassScores = std::map<CacheKey, double, CanonicalOrder>;

struct PredictionRecord {
  std::string query_id;
  CacheKey predicted_key;
  double confidence = 0.0;
  std::optional<ClassScores> class_scores;

  /// Confidence range, score normalization, and argmax consistency.
  void validate() const;
};

}  // namespace canoncache
