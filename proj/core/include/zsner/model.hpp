#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace zsner {

// Span identity is the verbatim string: two identical mentions are one span.
using SpanSet = std::set<std::string>;

/// A canonical entity tag together with the spelling variants folded into it.
struct EntityTag {
  std::string canonical;
  std::set<std::string> aliases;
  std::string source;

  /// Throws ValidationError when the canonical name is blank, not lowercase,
  /// or also listed among the aliases.
  void validate() const;

  friend bool operator==(const EntityTag&, const EntityTag&) = default;
};

enum class DgOrigin { generated, handwritten };

std::string_view to_string(DgOrigin origin);
DgOrigin dg_origin_from_string(std::string_view text);

/// Definition and annotation guidelines attached to one tag.
///
/// `dataset` optionally scopes the entry to one benchmark so that the same tag
/// may carry different guidelines per dataset (e.g. "person" in CrossNER-AI
/// vs CrossNER-Politics). An empty scope applies everywhere.
struct DefGuidelines {
  std::string tag;
  std::string definition;
  std::string guidelines;
  DgOrigin origin = DgOrigin::generated;
  std::string dataset;

  void validate() const;

  friend bool operator==(const DefGuidelines&, const DefGuidelines&) = default;
};

/// One input text with per-tag gold spans.
///
/// Each tag's list is duplicate-free and ordered by the offset of the span's
/// first occurrence in `text`.
struct AnnotatedDoc {
  std::string id;
  std::string text;
  std::map<std::string, std::vector<std::string>> gold;

  /// Number of gold spans for `tag` (0 when the tag is absent).
  std::size_t span_count(const std::string& tag) const;

  friend bool operator==(const AnnotatedDoc&, const AnnotatedDoc&) = default;
};

/// Reorders and dedups one gold list in place. Throws DataError naming the doc
/// and span when a span does not occur in the text.
void normalize_gold_list(const std::string& doc_id, std::string_view text,
                         std::vector<std::string>& spans);

/// Applies normalize_gold_list to every tag of the document.
void normalize_gold(AnnotatedDoc& doc);

enum class ParseStatus { clean, recovered, failed };

std::string_view to_string(ParseStatus status);
ParseStatus parse_status_from_string(std::string_view text);

/// What the model returned for one (document, tag) pair.
struct Prediction {
  std::string doc_id;
  std::string tag;
  SpanSet spans;
  std::string raw_output;
  ParseStatus parse_status = ParseStatus::clean;
  std::string error;  // transport or parse note, empty when none

  void validate() const;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  Counts& operator+=(const Counts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

struct TagScore {
  Counts counts;
  Prf prf;
  bool has_instances = true;  // false: no gold and no predicted spans
};

struct EvalReport {
  std::map<std::string, TagScore> per_tag;
  Counts micro_counts;
  Prf micro;
  Prf macro;
  std::size_t n_docs = 0;
  std::size_t n_tags = 0;
  std::string policy;  // description of the MatchPolicy used

  /// Checks the count and range invariants; throws ValidationError.
  void validate() const;
};

struct RunStats {
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t n_runs = 0;
};

}  // namespace zsner
