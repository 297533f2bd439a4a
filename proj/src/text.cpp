#include "vilegal/text.hpp"

#include "vilegal/errors.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace vilegal {

namespace {

const icu::Normalizer2& nfc_instance() {
    UErrorCode ec = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(ec);
    if (U_FAILURE(ec) || n == nullptr) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    return *n;
}

void require_valid_utf8(std::string_view text) {
    if (!is_valid_utf8(text)) {
        throw DataError("invalid UTF-8 input");
    }
}

icu::UnicodeString to_ustring(std::string_view text) {
    require_valid_utf8(text);
    return icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
}

std::string to_utf8(const icu::UnicodeString& s) {
    std::string out;
    s.toUTF8String(out);
    return out;
}

} // namespace

bool is_valid_utf8(std::string_view text) {
    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    int32_t len = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(s, i, len, c);
        if (c < 0) return false;
    }
    return true;
}

std::string nfc(std::string_view text) {
    UErrorCode ec = U_ZERO_ERROR;
    icu::UnicodeString out = nfc_instance().normalize(to_ustring(text), ec);
    if (U_FAILURE(ec)) throw DataError("NFC normalization failed");
    return to_utf8(out);
}

std::string fold_case(std::string_view text) {
    UErrorCode ec = U_ZERO_ERROR;
    icu::UnicodeString u = nfc_instance().normalize(to_ustring(text), ec);
    if (U_FAILURE(ec)) throw DataError("NFC normalization failed");
    u.foldCase();
    // Folding can denormalize; recompose so equal strings stay byte-equal.
    icu::UnicodeString out = nfc_instance().normalize(u, ec);
    if (U_FAILURE(ec)) throw DataError("NFC normalization failed");
    return to_utf8(out);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::string norm = nfc(text);
    std::vector<std::string> tokens;
    const auto* s = reinterpret_cast<const std::uint8_t*>(norm.data());
    int32_t len = static_cast<int32_t>(norm.size());
    int32_t i = 0;
    int32_t start = -1;
    while (i < len) {
        int32_t here = i;
        UChar32 c;
        U8_NEXT_UNSAFE(s, i, c);
        (void)len;
        if (u_isUWhiteSpace(c)) {
            if (start >= 0) {
                tokens.emplace_back(norm.substr(static_cast<std::size_t>(start),
                                                static_cast<std::size_t>(here - start)));
                start = -1;
            }
        } else if (start < 0) {
            start = here;
        }
    }
    if (start >= 0) {
        tokens.emplace_back(norm.substr(static_cast<std::size_t>(start)));
    }
    return tokens;
}

std::vector<std::string> tokenize_folded(std::string_view text) {
    return tokenize(fold_case(text));
}

std::size_t count_tokens(std::string_view text) {
    std::string norm = nfc(text);
    const auto* s = reinterpret_cast<const std::uint8_t*>(norm.data());
    int32_t len = static_cast<int32_t>(norm.size());
    int32_t i = 0;
    bool in_token = false;
    std::size_t count = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT_UNSAFE(s, i, c);
        bool ws = u_isUWhiteSpace(c);
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

} // namespace vilegal
