#include "gss/text.hpp"

#include <algorithm>
#include <cctype>

namespace gss {

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    const bool word = c >= 0x80 || std::isalnum(c) != 0;
    if (word) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::string_view a, std::string_view b) {
  const auto ta = tokenize_words(a);
  const auto tb = tokenize_words(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(ta, tb));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(ta.size());
  const double recall = lcs / static_cast<double>(tb.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace gss
