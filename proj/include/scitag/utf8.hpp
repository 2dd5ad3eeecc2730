#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace scitag::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Invalid bytes decode to
/// U+FFFD one byte at a time so that offsets stay well defined.
std::u32string decode(std::string_view text);

std::string encode(char32_t cp);
std::string encode(std::u32string_view text);

/// Unicode White_Space property.
bool isSpace(char32_t cp);

/// Simple case mapping for ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic; other scripts are returned unchanged.
char32_t toLower(char32_t cp);
bool isUpper(char32_t cp);
bool isLower(char32_t cp);
bool isDigit(char32_t cp);
bool isPunct(char32_t cp);

std::string toLower(std::string_view text);

/// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view text);

/// Substring by scalar offsets [begin, end).
std::string slice(std::string_view text, std::size_t begin, std::size_t end);

}  // namespace scitag::utf8
