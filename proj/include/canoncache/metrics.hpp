#pragma once

// Cache-key quality as clustering quality: a key function partitions queries,
// and the partition is scored against ground-truth intents.
//
// Entropies are in bits. Degenerate conventions: h = 1 when H(Intent) = 0,
// c = 1 when H(Key) = 0, V = 0 when h = c = 0, AMI = 0 when its denominator
// vanishes, FMI = 0 when either pair count is zero.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace canoncache::metrics {

class ContingencyTable {
 public:
  /// Rows are intents, columns keys; labels sorted lexicographically.
  ContingencyTable(std::vector<std::string> intent_labels, std::vector<std::string> key_labels,
                   std::vector<std::vector<std::int64_t>> counts);

  std::size_t rows() const noexcept { return counts_.size(); }
  std::size_t cols() const noexcept { return key_labels_.size(); }
  std::int64_t n() const noexcept { return n_; }
  std::int64_t at(std::size_t i, std::size_t j) const { return counts_[i][j]; }
  const std::vector<std::vector<std::int64_t>>& counts() const noexcept { return counts_; }
  const std::vector<std::string>& intent_labels() const noexcept { return intent_labels_; }
  const std::vector<std::string>& key_labels() const noexcept { return key_labels_; }
  const std::vector<std::int64_t>& row_sums() const noexcept { return row_sums_; }
  const std::vector<std::int64_t>& col_sums() const noexcept { return col_sums_; }

 private:
  std::vector<std::string> intent_labels_;
  std::vector<std::string> key_labels_;
  std::vector<std::vector<std::int64_t>> counts_;
  std::vector<std::int64_t> row_sums_;
  std::vector<std::int64_t> col_sums_;
  std::int64_t n_ = 0;
};

ContingencyTable build_contingency(std::span<const std::string> truth,
                                   std::span<const std::string> keys);

double entropy_bits(std::span<const std::int64_t> counts);
double intent_entropy(const ContingencyTable& t);
double key_entropy(const ContingencyTable& t);
/// H(Intent | Key)
double conditional_intent_entropy(const ContingencyTable& t);
/// H(Key | Intent)
double conditional_key_entropy(const ContingencyTable& t);

double homogeneity(const ContingencyTable& t);
double completeness(const ContingencyTable& t);
double v_measure(double h, double c, double beta = 1.0);

double mutual_information(const ContingencyTable& t);
/// E[MI] under the permutation model with fixed marginals (exact hypergeometric sum).
double expected_mutual_information(const ContingencyTable& t);
double adjusted_mi(const ContingencyTable& t);
double fowlkes_mallows(const ContingencyTable& t);

namespace serial {
double expected_mutual_information(const ContingencyTable& t);
}  // namespace serial

struct KeyQualityReport {
  double h = 0.0;
  double c = 0.0;
  double v = 0.0;
  double beta = 1.0;
  double mi = 0.0;
  double ami = 0.0;
  double fmi = 0.0;
  double h_intent = 0.0;
  double h_key = 0.0;
  double rate_bits = 0.0;
  double distortion = 0.0;
  std::int64_t n_keys = 0;
};

KeyQualityReport report(std::span<const std::string> truth, std::span<const std::string> keys,
                        double beta = 1.0);
KeyQualityReport report(const ContingencyTable& t, double beta = 1.0);

}  // namespace canoncache::metrics
