#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "lexdial/error.hpp"

namespace lexdial {

struct normalization_config {
    /// Fold acute accents and diaeresis on vowels. Never touches ñ.
    bool fold_diacritics = true;

    bool operator==(const normalization_config&) const = default;
};

namespace detail {

inline UChar32 fold_vowel(UChar32 c) {
    switch (c) {
    case 0x00E1: return 'a'; // á
    case 0x00E9: return 'e'; // é
    case 0x00ED: return 'i'; // í
    case 0x00F3: return 'o'; // ó
    case 0x00FA: return 'u'; // ú
    case 0x00FC: return 'u'; // ü
    default: return c;
    }
}

inline bool is_folded_mark(UChar32 c) {
    return c == 0x0301 || c == 0x0308; // combining acute, combining diaeresis
}

inline void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool err = false;
    U8_APPEND(buf, len, U8_MAX_LENGTH, c, err);
    if (!err) out.append(buf, static_cast<std::size_t>(len));
}

inline bool is_ascii(std::string_view s) {
    for (unsigned char c : s)
        if (c >= 0x80) return false;
    return true;
}

} // namespace detail

/// Splits raw text into lowercase tokens: maximal runs of letters and digits
/// after NFC composition. Nonspacing marks that survive composition stay
/// attached to the token they follow. Invalid UTF-8 bytes act as separators.
inline std::vector<std::string> normalize_text(std::string_view raw,
                                               const normalization_config& config = {}) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    };

    if (detail::is_ascii(raw)) {
        for (char ch : raw) {
            unsigned char c = static_cast<unsigned char>(ch);
            if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
                current.push_back(static_cast<char>(c));
            } else if (c >= 'A' && c <= 'Z') {
                current.push_back(static_cast<char>(c - 'A' + 'a'));
            } else {
                flush();
            }
        }
        flush();
        return tokens;
    }

    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

    icu::UnicodeString text = icu::UnicodeString::fromUTF8(
        icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
    icu::UnicodeString composed = nfc->normalize(text, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");

    for (int32_t i = 0; i < composed.length();) {
        UChar32 c = composed.char32At(i);
        i += U16_LENGTH(c);
        if (u_isalnum(c)) {
            c = u_tolower(c);
            if (config.fold_diacritics) c = detail::fold_vowel(c);
            detail::append_utf8(current, c);
        } else if (!current.empty() && u_charType(c) == U_NON_SPACING_MARK) {
            if (!(config.fold_diacritics && detail::is_folded_mark(c)))
                detail::append_utf8(current, c);
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

/// Joins tokens with a separator.
inline std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

} // namespace lexdial
