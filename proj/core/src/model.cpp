#include "zsner/model.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "zsner/errors.hpp"
#include "zsner/text.hpp"

namespace zsner {

void EntityTag::validate() const {
  if (text::trim_ascii(canonical).empty()) {
    throw ValidationError("entity tag with blank canonical name");
  }
  if (text::ascii_lower(canonical) != canonical) {
    throw ValidationError(fmt::format("entity tag '{}' is not lowercase", canonical));
  }
  if (aliases.count(canonical) != 0) {
    throw ValidationError(fmt::format("entity tag '{}' lists itself as an alias", canonical));
  }
}

std::string_view to_string(DgOrigin origin) {
  return origin == DgOrigin::generated ? "generated" : "handwritten";
}

DgOrigin dg_origin_from_string(std::string_view text) {
  if (text == "generated") return DgOrigin::generated;
  if (text == "handwritten") return DgOrigin::handwritten;
  throw ValidationError(fmt::format("unknown D&G origin '{}'", text));
}

void DefGuidelines::validate() const {
  if (text::trim_ascii(tag).empty()) throw ValidationError("D&G entry without a tag");
  if (text::trim_unicode(definition).empty()) {
    throw ValidationError(fmt::format("D&G entry for '{}' has an empty definition", tag));
  }
  if (text::trim_unicode(guidelines).empty()) {
    throw ValidationError(fmt::format("D&G entry for '{}' has empty guidelines", tag));
  }
}

std::size_t AnnotatedDoc::span_count(const std::string& tag) const {
  auto it = gold.find(tag);
  return it == gold.end() ? 0 : it->second.size();
}

void normalize_gold_list(const std::string& doc_id, std::string_view text,
                         std::vector<std::string>& spans) {
  struct Located {
    std::size_t offset;
    std::string span;
  };
  std::vector<Located> located;
  located.reserve(spans.size());
  std::unordered_set<std::string_view> seen;
  for (const auto& span : spans) {
    if (span.empty()) {
      throw DataError(fmt::format("document '{}': empty gold span", doc_id));
    }
    if (!seen.insert(span).second) continue;
    auto pos = text.find(span);
    if (pos == std::string_view::npos) {
      throw DataError(
          fmt::format("document '{}': gold span \"{}\" does not occur in the text", doc_id, span));
    }
    located.push_back({pos, span});
  }
  // Spans starting at the same offset (one nested in the other) are ordered
  // shorter first.
  std::stable_sort(located.begin(), located.end(), [](const Located& a, const Located& b) {
    if (a.offset != b.offset) return a.offset < b.offset;
    if (a.span.size() != b.span.size()) return a.span.size() < b.span.size();
    return a.span < b.span;
  });
  std::vector<std::string> out;
  out.reserve(located.size());
  for (auto& l : located) out.push_back(std::move(l.span));
  spans = std::move(out);
}

void normalize_gold(AnnotatedDoc& doc) {
  for (auto& [tag, spans] : doc.gold) normalize_gold_list(doc.id, doc.text, spans);
}

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::clean:
      return "clean";
    case ParseStatus::recovered:
      return "recovered";
    case ParseStatus::failed:
      return "failed";
  }
  return "failed";
}

ParseStatus parse_status_from_string(std::string_view text) {
  if (text == "clean") return ParseStatus::clean;
  if (text == "recovered") return ParseStatus::recovered;
  if (text == "failed") return ParseStatus::failed;
  throw ValidationError(fmt::format("unknown parse status '{}'", text));
}

void Prediction::validate() const {
  if (parse_status == ParseStatus::failed && !spans.empty()) {
    throw ValidationError(fmt::format(
        "prediction ({}, {}) is marked failed but carries {} spans", doc_id, tag, spans.size()));
  }
}

void EvalReport::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  auto check = [&](const Prf& p, std::string_view what) {
    if (!in_unit(p.precision) || !in_unit(p.recall) || !in_unit(p.f1)) {
      throw ValidationError(fmt::format("{} scores outside [0, 1]", what));
    }
  };
  Counts sum;
  for (const auto& [tag, score] : per_tag) {
    check(score.prf, tag);
    sum += score.counts;
  }
  check(micro, "micro");
  check(macro, "macro");
  if (!(sum == micro_counts)) {
    throw ValidationError("micro counts differ from the sum of per-tag counts");
  }
}

}  // namespace zsner
