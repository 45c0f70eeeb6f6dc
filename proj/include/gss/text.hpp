#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gss {

/// Lowercased word tokens; ASCII punctuation and whitespace separate tokens,
/// non-ASCII bytes are kept inside words.
std::vector<std::string> tokenize_words(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Rouge-L F1 over word tokens. Two empty texts score 1.
double rouge_l_f1(std::string_view a, std::string_view b);

}  // namespace gss
