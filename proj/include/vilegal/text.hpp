#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vilegal {

// Canonical composition (NFC) of UTF-8 text. Throws DataError on invalid
// UTF-8 (overlongs, surrogates, truncated sequences).
std::string nfc(std::string_view text);

// NFC + full Unicode case folding, re-composed. Used wherever the contract
// says "case folding": the blacklist filter and BM25 term normalization.
std::string fold_case(std::string_view text);

// NFC-normalize, then split on runs of Unicode whitespace. "" -> {}.
std::vector<std::string> tokenize(std::string_view text);

// tokenize(fold_case(text)): the term pipeline for lexical indexing.
std::vector<std::string> tokenize_folded(std::string_view text);

// Token count of the tokenize() pipeline without materializing the tokens.
std::size_t count_tokens(std::string_view text);

bool is_valid_utf8(std::string_view text);

} // namespace vilegal
