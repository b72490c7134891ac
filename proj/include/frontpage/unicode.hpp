#pragma once

#include <string>
#include <string_view>
#include <vector>

// Thin UTF-8 helpers over ICU. Everything downstream compares text only after
// passing it through normalize_nfc.
namespace frontpage::unicode {

std::string normalize_nfc(std::string_view utf8);

// Full Unicode case folding. Identity for uncased scripts (Hebrew, digits).
std::string fold_case(std::string_view utf8);

std::string to_lower(std::string_view utf8);

// Replaces every run of Unicode whitespace with one ASCII space and trims.
std::string collapse_whitespace(std::string_view utf8);

// Splits on Unicode whitespace; never yields empty pieces.
std::vector<std::string> split_whitespace(std::string_view utf8);

// Removes leading and trailing punctuation code points (general category P*).
std::string strip_punctuation(std::string_view utf8);

std::size_t code_point_count(std::string_view utf8);

bool is_blank(std::string_view utf8);

// Code point classification at a byte offset that starts a code point.
bool is_letter_or_digit_before(std::string_view utf8, std::size_t byte_offset);
bool is_letter_at(std::string_view utf8, std::size_t byte_offset);

// Splits into code points (each as its UTF-8 bytes).
std::vector<std::string> code_points(std::string_view utf8);

}  // namespace frontpage::unicode
