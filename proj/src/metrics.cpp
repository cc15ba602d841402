#include "canoncache/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "canoncache/core.hpp"

namespace canoncache::metrics {

ContingencyTable::ContingencyTable(std::vector<std::string> intent_labels,
                                   std::vector<std::string> key_labels,
                                   std::vector<std::vector<std::int64_t>> counts)
    : intent_labels_(std::move(intent_labels)),
      key_labels_(std::move(key_labels)),
      counts_(std::move(counts)) {
  if (counts_.size() != intent_labels_.size()) {
    throw Error(ErrorCode::Validation, "contingency rows do not match intent labels");
  }
  row_sums_.assign(rows(), 0);
  col_sums_.assign(cols(), 0);
  for (std::size_t i = 0; i < rows(); ++i) {
    if (counts_[i].size() != cols()) {
      throw Error(ErrorCode::Validation, "contingency row has the wrong width");
    }
    for (std::size_t j = 0; j < cols(); ++j) {
      if (counts_[i][j] < 0) throw Error(ErrorCode::Validation, "negative contingency count");
      row_sums_[i] += counts_[i][j];
      col_sums_[j] += counts_[i][j];
    }
  }
  for (auto s : row_sums_) n_ += s;
  if (n_ == 0) throw Error(ErrorCode::EmptyInput, "contingency table is empty");
  if (std::find(row_sums_.begin(), row_sums_.end(), 0) != row_sums_.end() ||
      std::find(col_sums_.begin(), col_sums_.end(), 0) != col_sums_.end()) {
    throw Error(ErrorCode::Validation, "contingency table has an all-zero row or column");
  }
}

ContingencyTable build_contingency(std::span<const std::string> truth,
                                   std::span<const std::string> keys) {
  if (truth.size() != keys.size()) {
    throw Error(ErrorCode::LengthMismatch, "truth and keys differ in length");
  }
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "no items to tabulate");

  std::map<std::string, std::size_t> rows;
  std::map<std::string, std::size_t> cols;
  for (const auto& s : truth) rows.emplace(s, 0);
  for (const auto& s : keys) cols.emplace(s, 0);
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  for (auto& [label, idx] : rows) {
    idx = row_labels.size();
    row_labels.push_back(label);
  }
  for (auto& [label, idx] : cols) {
    idx = col_labels.size();
    col_labels.push_back(label);
  }
  std::vector<std::vector<std::int64_t>> counts(row_labels.size(),
                                                std::vector<std::int64_t>(col_labels.size(), 0));
  for (std::size_t k = 0; k < truth.size(); ++k) {
    counts[rows.at(truth[k])][cols.at(keys[k])] += 1;
  }
  return ContingencyTable(std::move(row_labels), std::move(col_labels), std::move(counts));
}

double entropy_bits(std::span<const std::int64_t> counts) {
  std::int64_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) return 0.0;
  const double total = static_cast<double>(n);
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

double intent_entropy(const ContingencyTable& t) { return entropy_bits(t.row_sums()); }
double key_entropy(const ContingencyTable& t) { return entropy_bits(t.col_sums()); }

double conditional_intent_entropy(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  double h = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const auto nij = t.at(i, j);
      if (nij == 0) continue;
      h -= (static_cast<double>(nij) / n) *
           std::log2(static_cast<double>(nij) / static_cast<double>(t.col_sums()[j]));
    }
  }
  return std::max(h, 0.0);
}

double conditional_key_entropy(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  double h = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const auto nij = t.at(i, j);
      if (nij == 0) continue;
      h -= (static_cast<double>(nij) / n) *
           std::log2(static_cast<double>(nij) / static_cast<double>(t.row_sums()[i]));
    }
  }
  return std::max(h, 0.0);
}

double homogeneity(const ContingencyTable& t) {
  const double hi = intent_entropy(t);
  if (hi == 0.0) return 1.0;
  return 1.0 - conditional_intent_entropy(t) / hi;
}

double completeness(const ContingencyTable& t) {
  const double hk = key_entropy(t);
  if (hk == 0.0) return 1.0;
  return 1.0 - conditional_key_entropy(t) / hk;
}

double v_measure(double h, double c, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidParams, "beta must be positive");
  const double b2 = beta * beta;
  const double denom = b2 * h + c;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * h * c / denom;
}

double mutual_information(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  double mi = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const auto nij = t.at(i, j);
      if (nij == 0) continue;
      const double a = static_cast<double>(t.row_sums()[i]);
      const double b = static_cast<double>(t.col_sums()[j]);
      mi += (static_cast<double>(nij) / n) * std::log2(n * static_cast<double>(nij) / (a * b));
    }
  }
  return std::max(mi, 0.0);
}

namespace {

// Contribution of intent row i to E[MI]: sum over key columns j and every
// feasible cell value of (nij/N) log2(N nij / (a b)) * Hypergeometric(nij; N, a, b).
double emi_row(const ContingencyTable& t, std::size_t i) {
  const std::int64_t big_n = t.n();
  const double n = static_cast<double>(big_n);
  const std::int64_t a = t.row_sums()[i];
  const double lg_n = std::lgamma(n + 1.0);
  const double lg_a = std::lgamma(static_cast<double>(a) + 1.0);
  const double lg_na = std::lgamma(static_cast<double>(big_n - a) + 1.0);
  double row = 0.0;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const std::int64_t b = t.col_sums()[j];
    const double lg_b = std::lgamma(static_cast<double>(b) + 1.0);
    const double lg_nb = std::lgamma(static_cast<double>(big_n - b) + 1.0);
    const double fixed = lg_a + lg_b + lg_na + lg_nb - lg_n;
    const std::int64_t lo = std::max<std::int64_t>(1, a + b - big_n);
    const std::int64_t hi = std::min(a, b);
    for (std::int64_t nij = lo; nij <= hi; ++nij) {
      const double x = static_cast<double>(nij);
      const double log_p = fixed - std::lgamma(x + 1.0) -
                           std::lgamma(static_cast<double>(a - nij) + 1.0) -
                           std::lgamma(static_cast<double>(b - nij) + 1.0) -
                           std::lgamma(static_cast<double>(big_n - a - b + nij) + 1.0);
      const double term = (x / n) * std::log2(n * x / (static_cast<double>(a) * static_cast<double>(b)));
      row += term * std::exp(log_p);
    }
  }
  return row;
}

}  // namespace

double expected_mutual_information(const ContingencyTable& t) {
  std::vector<double> partial(t.rows(), 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(t.rows());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    partial[i] = emi_row(t, static_cast<std::size_t>(i));
  }
  double emi = 0.0;
  for (double p : partial) emi += p;
  return emi;
}

namespace serial {
double expected_mutual_information(const ContingencyTable& t) {
  double emi = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) emi += emi_row(t, i);
  return emi;
}
}  // namespace serial

double adjusted_mi(const ContingencyTable& t) {
  const double mi = mutual_information(t);
  const double emi = expected_mutual_information(t);
  const double mean_h = 0.5 * (intent_entropy(t) + key_entropy(t));
  const double denom = mean_h - emi;
  if (denom == 0.0) return 0.0;
  return (mi - emi) / denom;
}

double fowlkes_mallows(const ContingencyTable& t) {
  auto pairs = [](std::int64_t k) { return k * (k - 1) / 2; };
  std::int64_t tp = 0;
  for (const auto& row : t.counts()) {
    for (auto nij : row) tp += pairs(nij);
  }
  std::int64_t same_key = 0;
  for (auto b : t.col_sums()) same_key += pairs(b);
  std::int64_t same_intent = 0;
  for (auto a : t.row_sums()) same_intent += pairs(a);
  if (same_key == 0 || same_intent == 0) return 0.0;
  return static_cast<double>(tp) /
         std::sqrt(static_cast<double>(same_key) * static_cast<double>(same_intent));
}

KeyQualityReport report(const ContingencyTable& t, double beta) {
  KeyQualityReport r;
  r.beta = beta;
  r.h = homogeneity(t);
  r.c = completeness(t);
  r.v = v_measure(r.h, r.c, beta);
  r.mi = mutual_information(t);
  r.ami = adjusted_mi(t);
  r.fmi = fowlkes_mallows(t);
  r.h_intent = intent_entropy(t);
  r.h_key = key_entropy(t);
  r.n_keys = static_cast<std::int64_t>(t.cols());
  r.rate_bits = std::log2(static_cast<double>(r.n_keys));
  r.distortion = 1.0 - r.h;
  return r;
}

KeyQualityReport report(std::span<const std::string> truth, std::span<const std::string> keys,
                        double beta) {
  return report(build_contingency(truth, keys), beta);
}

}  // namespace canoncache::metrics
