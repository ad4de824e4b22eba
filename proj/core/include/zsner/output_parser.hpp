#pragma once

#include <string_view>

#include "zsner/model.hpp"

namespace zsner {

struct ParsedOutput {
  SpanSet spans;
  ParseStatus status = ParseStatus::failed;

  friend bool operator==(const ParsedOutput&, const ParsedOutput&) = default;
};

/// Turns a raw generation into a span set. Never throws.
///
///  - clean: the trimmed text is exactly a JSON array of strings;
///  - recovered: an array was found inside prose, code fences or a wrapper
///    object, or needed lenient parsing (single quotes, trailing commas,
///    truncation, scalar elements coerced to text);
///  - failed: nothing salvageable; spans are empty.
ParsedOutput parse_model_output(std::string_view raw);

}  // namespace zsner
