#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace zsner::text {

/// Half-open byte range of one whitespace-delimited word.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// A word is a maximal run of non-whitespace bytes (ASCII whitespace).
std::vector<WordSpan> split_words(std::string_view text);

std::string_view trim_ascii(std::string_view s);
std::string ascii_lower(std::string_view s);

/// Strips Unicode White_Space from both ends. Invalid UTF-8 is passed through.
std::string trim_unicode(std::string_view s);

/// Unicode canonical composition (NFC). Invalid UTF-8 is returned unchanged.
std::string nfc(std::string_view s);

/// Full Unicode case folding, used for case-insensitive matching.
std::string case_fold(std::string_view s);

}  // namespace zsner::text
