#include "zsner/output_parser.hpp"

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/json_recovery.hpp"
#include "zsner/text.hpp"

namespace zsner {

namespace {

using nlohmann::json;

struct Elements {
  std::vector<std::string> strings;
  bool coerced = false;  // held something other than flat string literals
};

void flatten(const json& value, Elements& out) {
  switch (value.type()) {
    case json::value_t::string:
      out.strings.push_back(value.get<std::string>());
      break;
    case json::value_t::array:
      out.coerced = true;
      for (const auto& v : value) flatten(v, out);
      break;
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
    case json::value_t::boolean:
      out.coerced = true;
      out.strings.push_back(value.dump());
      break;
    default:  // null, objects
      out.coerced = true;
      break;
  }
}

Elements elements_of(const json& array) {
  Elements e;
  for (const auto& v : array) flatten(v, e);
  return e;
}

// Lenient reader for array literals: single-quoted strings, bare scalars,
// trailing commas, and input that stops before the closing bracket.
class LenientArrayReader {
 public:
  explicit LenientArrayReader(std::string_view s) : s_(s) {}

  // nullopt on a syntax error; a truncated array yields its complete elements.
  std::optional<Elements> read() {
    Elements out;
    skip_ws();
    if (!eat('[')) return std::nullopt;
    if (!read_items(out)) return std::nullopt;
    return out;
  }

 private:
  bool read_items(Elements& out) {
    for (;;) {
      skip_ws();
      if (at_end()) return true;  // truncated: keep what was complete
      if (eat(']')) return true;
      char c = s_[pos_];
      if (c == '"' || c == '\'') {
        auto str = read_string(c);
        if (!str) return at_end();
        out.strings.push_back(std::move(*str));
      } else if (c == '[') {
        ++pos_;
        out.coerced = true;
        if (!read_items(out)) return false;
      } else {
        auto scalar = read_bare();
        if (scalar.empty()) return false;
        out.coerced = true;
        if (scalar != "null" && scalar != "None") out.strings.push_back(std::move(scalar));
      }
      skip_ws();
      if (at_end()) return true;
      if (eat(',')) continue;
      if (eat(']')) return true;
      return false;
    }
  }

  std::optional<std::string> read_string(char quote) {
    std::size_t start = pos_;
    ++pos_;
    bool escaped = false;
    for (; pos_ < s_.size(); ++pos_) {
      char c = s_[pos_];
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == quote) {
        ++pos_;
        return decode(s_.substr(start, pos_ - start), quote);
      }
    }
    return std::nullopt;  // unterminated literal: dropped
  }

  static std::optional<std::string> decode(std::string_view literal, char quote) {
    if (quote == '"') {
      auto j = json::parse(literal, nullptr, false);
      if (j.is_string()) return j.get<std::string>();
      return std::nullopt;
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < literal.size(); ++i) {
      if (literal[i] == '\\' && i + 2 < literal.size()) {
        char next = literal[++i];
        switch (next) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(next); break;
        }
      } else {
        out.push_back(literal[i]);
      }
    }
    return out;
  }

  std::string read_bare() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '[' &&
           s_[pos_] != '"' && s_[pos_] != '\'') {
      ++pos_;
    }
    return std::string(text::trim_ascii(s_.substr(start, pos_ - start)));
  }

  void skip_ws() {
    while (pos_ < s_.size() &&
           (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
      ++pos_;
    }
  }
  bool eat(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool at_end() const { return pos_ >= s_.size(); }

  std::string_view s_;
  std::size_t pos_ = 0;
};

SpanSet to_set(const std::vector<std::string>& strings, bool drop_blank) {
  SpanSet out;
  for (const auto& s : strings) {
    if (drop_blank && text::trim_ascii(s).empty()) continue;
    out.insert(s);
  }
  return out;
}

}  // namespace

ParsedOutput parse_model_output(std::string_view raw) {
  std::string_view t = text::trim_ascii(raw);
  if (t.size() >= 3 && t.substr(0, 3) == "\xEF\xBB\xBF") t = text::trim_ascii(t.substr(3));

  // Exactly a JSON array.
  if (!t.empty() && t.front() == '[') {
    auto j = json::parse(t, nullptr, false);
    if (j.is_array()) {
      auto e = elements_of(j);
      if (!e.coerced) return {to_set(e.strings, false), ParseStatus::clean};
      auto spans = to_set(e.strings, true);
      if (spans.empty()) return {{}, ParseStatus::failed};
      return {std::move(spans), ParseStatus::recovered};
    }
  }

  // Arrays embedded somewhere in the text. Preference: first non-empty array
  // of strings, then an explicitly empty array, then coerced scalars.
  std::optional<SpanSet> empty_choice;
  std::optional<SpanSet> coerced_choice;
  std::size_t covered_until = 0;
  for (const auto& cand : scan_json_candidates(t, '[')) {
    if (cand.begin < covered_until) continue;
    auto piece = t.substr(cand.begin, cand.end - cand.begin);
    std::optional<Elements> elems;
    auto j = json::parse(piece, nullptr, false);
    if (j.is_array()) {
      elems = elements_of(j);
    } else if (auto lenient = LenientArrayReader(piece).read()) {
      elems = std::move(lenient);
    }
    if (!elems) continue;
    covered_until = cand.end;
    auto spans = to_set(elems->strings, true);
    if (spans.empty()) {
      if (!elems->coerced && !empty_choice) empty_choice = SpanSet{};
      continue;
    }
    if (!elems->coerced) return {std::move(spans), ParseStatus::recovered};
    if (!coerced_choice) coerced_choice = std::move(spans);
  }
  if (empty_choice) return {{}, ParseStatus::recovered};
  if (coerced_choice) return {std::move(*coerced_choice), ParseStatus::recovered};
  return {{}, ParseStatus::failed};
}

}  // namespace zsner
