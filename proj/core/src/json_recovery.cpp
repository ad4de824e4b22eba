#include "zsner/json_recovery.hpp"

namespace zsner {

namespace {

// A single quote only opens a literal in value position, so apostrophes in
// prose do not swallow the rest of the text.
bool value_position(std::string_view text, std::size_t pos, std::size_t floor) {
  while (pos > floor) {
    char c = text[pos - 1];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      --pos;
      continue;
    }
    return c == '[' || c == ',' || c == '{' || c == ':';
  }
  return false;
}

JsonCandidate scan_from(std::string_view text, std::size_t begin) {
  int depth = 0;
  char quote = 0;
  bool escaped = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    char c = text[i];
    if (quote != 0) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    switch (c) {
      case '"':
        quote = c;
        break;
      case '\'':
        if (value_position(text, i, begin)) quote = c;
        break;
      case '[':
      case '{':
        ++depth;
        break;
      case ']':
      case '}':
        if (--depth == 0) return {begin, i + 1, true};
        break;
      default:
        break;
    }
  }
  return {begin, text.size(), false};
}

}  // namespace

std::vector<JsonCandidate> scan_json_candidates(std::string_view text, char open) {
  std::vector<JsonCandidate> out;
  for (std::size_t pos = text.find(open); pos != std::string_view::npos;
       pos = text.find(open, pos + 1)) {
    out.push_back(scan_from(text, pos));
  }
  return out;
}

}  // namespace zsner
