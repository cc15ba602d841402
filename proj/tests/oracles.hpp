#pragma once

// Brute-force reference implementations. They work from raw label lists and
// item pairs rather than the contingency table, so they share no code with
// the library's metrics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Labels = std::vector<std::string>;

inline double entropy(const Labels& xs) {
  std::map<std::string, double> c;
  for (const auto& x : xs) c[x] += 1.0;
  const double n = static_cast<double>(xs.size());
  double h = 0.0;
  for (const auto& [k, v] : c) h -= (v / n) * std::log2(v / n);
  return h;
}

// H(A | B) = sum over b of P(b) H(A | B = b)
inline double cond_entropy(const Labels& a, const Labels& b) {
  std::map<std::string, Labels> groups;
  for (std::size_t i = 0; i < a.size(); ++i) groups[b[i]].push_back(a[i]);
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [k, g] : groups) h += static_cast<double>(g.size()) / n * entropy(g);
  return h;
}

inline double mi(const Labels& a, const Labels& b) {
  std::map<std::pair<std::string, std::string>, double> joint;
  std::map<std::string, double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double m = 0.0;
  for (const auto& [k, v] : joint) m += v / n * std::log2(n * v / (ca[k.first] * cb[k.second]));
  return m;
}

inline double homogeneity(const Labels& truth, const Labels& keys) {
  const double hi = entropy(truth);
  return hi == 0.0 ? 1.0 : 1.0 - cond_entropy(truth, keys) / hi;
}

inline double completeness(const Labels& truth, const Labels& keys) {
  const double hk = entropy(keys);
  return hk == 0.0 ? 1.0 : 1.0 - cond_entropy(keys, truth) / hk;
}

inline double v_measure(double h, double c, double beta = 1.0) {
  if (h + c == 0.0) return 0.0;
  return (1.0 + beta) * h * c / (beta * h + c);
}

// Hypergeometric pmf walked by its ratio recurrence, starting from an exact
// product for the first term.
inline double emi_counts(const std::vector<long>& rows, const std::vector<long>& cols, long n) {
  long double total = 0.0L;
  const long double N = static_cast<long double>(n);
  for (long a : rows) {
    for (long b : cols) {
      const long lo = std::max(1L, a + b - n);
      const long hi = std::min(a, b);
      if (lo > hi) continue;
      // P(X = lo) for X ~ Hypergeometric(N, K=a, draws=b)
      const long start = std::max(0L, a + b - n);
      long double logp = std::lgamma(static_cast<long double>(a + 1)) -
                         std::lgamma(static_cast<long double>(start + 1)) -
                         std::lgamma(static_cast<long double>(a - start + 1)) +
                         std::lgamma(static_cast<long double>(n - a + 1)) -
                         std::lgamma(static_cast<long double>(b - start + 1)) -
                         std::lgamma(static_cast<long double>(n - a - b + start + 1)) -
                         std::lgamma(static_cast<long double>(n + 1)) +
                         std::lgamma(static_cast<long double>(b + 1)) +
                         std::lgamma(static_cast<long double>(n - b + 1));
      long double p = std::exp(logp);
      for (long k = start; k <= hi; ++k) {
        if (k >= lo) {
          const long double kk = static_cast<long double>(k);
          total += p * (kk / N) * std::log2(N * kk / (static_cast<long double>(a) * static_cast<long double>(b)));
        }
        p *= static_cast<long double>(a - k) * static_cast<long double>(b - k) /
             (static_cast<long double>(k + 1) * static_cast<long double>(n - a - b + k + 1));
      }
    }
  }
  return static_cast<double>(total);
}

inline double emi(const Labels& a, const Labels& b) {
  std::map<std::string, long> ca, cb;
  for (const auto& x : a) ++ca[x];
  for (const auto& x : b) ++cb[x];
  std::vector<long> r, c;
  for (const auto& [k, v] : ca) r.push_back(v);
  for (const auto& [k, v] : cb) c.push_back(v);
  return emi_counts(r, c, static_cast<long>(a.size()));
}

// Exact E[MI] by averaging over every permutation of `b`; n <= 8 only.
inline double emi_by_permutation(const Labels& a, Labels b) {
  std::vector<std::size_t> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  double sum = 0.0;
  long count = 0;
  do {
    Labels perm(b.size());
    for (std::size_t i = 0; i < idx.size(); ++i) perm[i] = b[idx[i]];
    sum += mi(a, perm);
    ++count;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return sum / static_cast<double>(count);
}

inline double ami(const Labels& a, const Labels& b) {
  const double m = mi(a, b);
  const double e = emi(a, b);
  const double denom = 0.5 * (entropy(a) + entropy(b)) - e;
  return denom == 0.0 ? 0.0 : (m - e) / denom;
}

inline double fmi(const Labels& truth, const Labels& keys) {
  double tp = 0.0, same_key = 0.0, same_truth = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      const bool t = truth[i] == truth[j];
      const bool k = keys[i] == keys[j];
      tp += (t && k) ? 1.0 : 0.0;
      same_key += k ? 1.0 : 0.0;
      same_truth += t ? 1.0 : 0.0;
    }
  }
  if (same_key == 0.0 || same_truth == 0.0) return 0.0;
  return tp / std::sqrt(same_key * same_truth);
}

/// Random paired labelings with at most `max_r` intents and `max_c` keys.
inline std::pair<Labels, Labels> random_labels(std::mt19937_64& rng, int max_r, int max_c, int max_n) {
  std::uniform_int_distribution<int> nr(1, max_r), nc(1, max_c), nn(1, max_n);
  const int r = nr(rng), c = nc(rng), n = nn(rng);
  std::uniform_int_distribution<int> pr(0, r - 1), pc(0, c - 1);
  Labels a, b;
  for (int i = 0; i < n; ++i) {
    a.push_back("i" + std::to_string(pr(rng)));
    b.push_back("k" + std::to_string(pc(rng)));
  }
  return {a, b};
}

}  // namespace oracle
