#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace zsner {

/// A bracketed region found inside free text.
struct JsonCandidate {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the closing bracket, or text size if unterminated
  bool terminated = true;
};

/// Reports one candidate per occurrence of `open` ('[' or '{'), in order of
/// position. Each candidate extends to the bracket that balances it, skipping
/// over double- or single-quoted string literals and their escapes. Candidates
/// may nest; callers decide which to keep.
std::vector<JsonCandidate> scan_json_candidates(std::string_view text, char open);

}  // namespace zsner
