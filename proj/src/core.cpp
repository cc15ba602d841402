#include "canoncache/core.hpp"

#include <algorithm>
#include <cmath>

namespace canoncache {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ResolverUnavailable: return "ResolverUnavailable";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::SharesInvalid: return "SharesInvalid";
    case ErrorCode::NoCoverage: return "NoCoverage";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_canonical_token(std::string_view token) noexcept {
  if (token.empty() || token.front() < 'a' || token.front() > 'z') return false;
  return std::all_of(token.begin(), token.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_';
  });
}

CacheKey::CacheKey(std::string action, std::string target)
    : action_(std::move(action)), target_(std::move(target)) {
  if (!is_canonical_token(action_) || !is_canonical_token(target_)) {
    throw Error(ErrorCode::Validation,
                "invalid cache key tokens ('" + action_ + "', '" + target_ + "')");
  }
}

std::strong_ordering operator<=>(const CacheKey& a, const CacheKey& b) {
  return canonical_key_string(a) <=> canonical_key_string(b);
}

std::string canonical_key_string(const CacheKey& key) {
  std::string out;
  out.reserve(key.action().size() + key.target().size() + 1);
  out += key.action();
  out += ':';
  out += key.target();
  return out;
}

CacheKey parse_cache_key(std::string_view text) {
  const auto sep = text.find(':');
  if (sep == std::string_view::npos || text.find(':', sep + 1) != std::string_view::npos) {
    throw Error(ErrorCode::Validation, "malformed cache key '" + std::string(text) + "'");
  }
  return CacheKey(std::string(text.substr(0, sep)), std::string(text.substr(sep + 1)));
}

IntentLabel::IntentLabel(std::string label) : label_(std::move(label)) {
  const auto sep = label_.find(':');
  const bool ok = sep == std::string::npos
                      ? is_canonical_token(label_)
                      : (is_canonical_token(std::string_view(label_).substr(0, sep)) &&
                         is_canonical_token(std::string_view(label_).substr(sep + 1)));
  if (!ok) throw Error(ErrorCode::Validation, "invalid intent label '" + label_ + "'");
}

std::optional<CacheKey> IntentLabel::as_key() const {
  if (label_.find(':') == std::string::npos) return std::nullopt;
  return parse_cache_key(label_);
}

void Query::validate() const {
  if (id.empty()) throw Error(ErrorCode::Validation, "query id is empty");
  const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
  });
  if (blank) throw Error(ErrorCode::Validation, "query '" + id + "' has empty text");
}

std::string_view slot_name(Slot slot) noexcept {
  switch (slot) {
    case Slot::who: return "who";
    case Slot::when: return "when";
    case Slot::how_much: return "how_much";
  }
  return "";
}

std::optional<Slot> parse_slot(std::string_view name) noexcept {
  if (name == "who") return Slot::who;
  if (name == "when") return Slot::when;
  if (name == "how_much") return Slot::how_much;
  return std::nullopt;
}

bool ParamSet::set_if_absent(Slot slot, std::string value) {
  if (value.empty()) throw Error(ErrorCode::Validation, "parameter values must be non-empty");
  return slots_.try_emplace(slot, std::move(value)).second;
}

std::optional<std::string> ParamSet::get(Slot slot) const {
  if (auto it = slots_.find(slot); it != slots_.end()) return it->second;
  return std::nullopt;
}

void PredictionRecord::validate() const {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::Validation, "confidence out of [0,1] for '" + query_id + "'");
  }
  if (!class_scores) return;
  if (class_scores->empty()) {
    throw Error(ErrorCode::Validation, "empty class scores for '" + query_id + "'");
  }
  double sum = 0.0;
  double best = -1.0;
  for (const auto& [key, score] : *class_scores) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw Error(ErrorCode::Validation, "class score out of [0,1] for '" + query_id + "'");
    }
    sum += score;
    best = std::max(best, score);
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::Validation, "class scores do not sum to 1 for '" + query_id + "'");
  }
  if (std::abs(confidence - best) > 1e-9) {
    throw Error(ErrorCode::Validation, "confidence is not the max score for '" + query_id + "'");
  }
  // argmax with the lexicographic tie-break: first key (canonical order) reaching the max
  for (const auto& [key, score] : *class_scores) {
    if (score == best) {
      if (!(key == predicted_key)) {
        throw Error(ErrorCode::Validation,
                    "predicted key is not the argmax of class scores for '" + query_id + "'");
      }
      break;
    }
  }
}

}  // namespace canoncache
