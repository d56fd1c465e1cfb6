#pragma once

#include <vector>

#include "tgen/common.hpp"
#include "tgen/world.hpp"

namespace tgen {

// Levenshtein distance (unit costs), Wagner-Fischer with two rows.
template <typename Seq>
int editDistance(const Seq& a, const Seq& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline std::vector<std::vector<int>> splitWords(const std::vector<int>& text) {
  std::vector<std::vector<int>> words;
  std::vector<int> cur;
  for (int s : text) {
    if (s == kSeparatorSymbol) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(s);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// Symbol-level and word-level error rates, reference-length denominators.
// Words are delimited by the reserved separator symbol.
inline std::pair<double, double> cerWer(const std::vector<int>& hyp, const std::vector<int>& ref) {
  if (ref.empty()) throw DomainError("cerWer: empty reference");
  double cer = static_cast<double>(editDistance(hyp, ref)) / static_cast<double>(ref.size());
  auto hw = splitWords(hyp);
  auto rw = splitWords(ref);
  if (rw.empty()) return {cer, 0.0};
  double wer = static_cast<double>(editDistance(hw, rw)) / static_cast<double>(rw.size());
  return {cer, wer};
}

}  // namespace tgen
