#include "frontpage/unicode.hpp"

#include <stdexcept>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace frontpage::unicode {
namespace {

std::string to_utf8(const icu::UnicodeString& s) {
    std::string out;
    s.toUTF8String(out);
    return out;
}

// Decodes the code point starting at `i` and advances `i`. Ill-formed bytes
// decode to U+FFFD (negative from U8_NEXT).
UChar32 next_code_point(std::string_view s, std::size_t& i) {
    UChar32 c = 0;
    auto idx = static_cast<int32_t>(i);
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), idx, static_cast<int32_t>(s.size()), c);
    i = static_cast<std::size_t>(idx);
    return c < 0 ? 0xFFFD : c;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

}  // namespace

std::string normalize_nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
    auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString dst = nfc->normalize(src, status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");
    return to_utf8(dst);
}

std::string fold_case(std::string_view utf8) {
    auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    s.foldCase();
    return to_utf8(s);
}

std::string to_lower(std::string_view utf8) {
    auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    s.toLower(icu::Locale::getRoot());
    return to_utf8(s);
}

std::string collapse_whitespace(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < utf8.size()) {
        std::size_t start = i;
        UChar32 c = next_code_point(utf8, i);
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(utf8.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view utf8) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    while (i < utf8.size()) {
        std::size_t start = i;
        UChar32 c = next_code_point(utf8, i);
        if (is_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.append(utf8.substr(start, i - start));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string strip_punctuation(std::string_view utf8) {
    std::size_t begin = 0;
    std::size_t end = utf8.size();
    // leading
    while (begin < end) {
        std::size_t i = begin;
        UChar32 c = next_code_point(utf8, i);
        if (!u_ispunct(c)) break;
        begin = i;
    }
    // trailing: walk forward remembering the end of the last non-punct code point
    std::size_t last_keep = begin;
    std::size_t i = begin;
    while (i < end) {
        UChar32 c = next_code_point(utf8, i);
        if (!u_ispunct(c)) last_keep = i;
    }
    return std::string(utf8.substr(begin, last_keep - begin));
}

std::size_t code_point_count(std::string_view utf8) {
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < utf8.size()) {
        next_code_point(utf8, i);
        ++n;
    }
    return n;
}

bool is_blank(std::string_view utf8) {
    std::size_t i = 0;
    while (i < utf8.size()) {
        if (!is_space(next_code_point(utf8, i))) return false;
    }
    return true;
}

bool is_letter_or_digit_before(std::string_view utf8, std::size_t byte_offset) {
    if (byte_offset == 0) return false;
    auto idx = static_cast<int32_t>(byte_offset);
    UChar32 c = 0;
    U8_PREV(reinterpret_cast<const uint8_t*>(utf8.data()), 0, idx, c);
    return c >= 0 && (u_isalnum(c) != 0);
}

bool is_letter_at(std::string_view utf8, std::size_t byte_offset) {
    if (byte_offset >= utf8.size()) return false;
    std::size_t i = byte_offset;
    return u_isalpha(next_code_point(utf8, i)) != 0;
}

std::vector<std::string> code_points(std::string_view utf8) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < utf8.size()) {
        std::size_t start = i;
        next_code_point(utf8, i);
        out.emplace_back(utf8.substr(start, i - start));
    }
    return out;
}

}  // namespace frontpage::unicode
