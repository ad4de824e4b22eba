#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/model.hpp"

namespace zsner::curation {

struct CurationConfig {
  std::size_t min_support = 100;
  std::map<std::string, std::string> alias_map;  // alias -> canonical
  std::set<std::string> blocklist;
  // Benchmark order is preserved from the config file for report rendering.
  std::vector<std::pair<std::string, std::set<std::string>>> test_tags;
  std::set<std::string> keep_despite_overlap;
  std::size_t k_pos = 5;
  std::size_t k_neg = 5;
  std::uint64_t rng_seed = 0;
  std::string source = "corpus";

  /// Throws ConfigError on invalid counts, overlapping blocklist/keep sets or
  /// alias chains.
  void validate() const;
};

CurationConfig curation_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const CurationConfig& config);
CurationConfig load_curation_config(const std::filesystem::path& path);

/// Support of a tag = number of unique gold spans of that tag, summed over docs.
std::map<std::string, std::size_t> tag_support(const std::vector<AnnotatedDoc>& corpus);

std::set<std::string> filter_by_support(const std::vector<AnnotatedDoc>& corpus,
                                        std::size_t min_support);

/// Folds aliases into their canonical tag and drops blocklisted labels. Tag
/// names are trimmed and lowercased first. Result is sorted by canonical name.
std::vector<EntityTag> canonicalize_tags(const std::set<std::string>& tags,
                                         const std::map<std::string, std::string>& alias_map,
                                         const std::set<std::string>& blocklist,
                                         const std::string& source = {});

/// Rewrites every document's gold map onto canonical names: alias lists are
/// merged into their canonical tag (re-sorted, deduplicated) and tags outside
/// `tags` are dropped.
std::vector<AnnotatedDoc> relabel_corpus(const std::vector<AnnotatedDoc>& corpus,
                                         const std::vector<EntityTag>& tags);

std::set<std::string> exclude_test_overlap(
    const std::set<std::string>& tags,
    const std::vector<std::pair<std::string, std::set<std::string>>>& test_tags,
    const std::set<std::string>& keep);

enum class Polarity { positive, negative };

std::string_view to_string(Polarity p);

struct TrainingExample {
  std::string tag;
  const AnnotatedDoc* doc = nullptr;  // points into the corpus passed to the sampler
  Polarity polarity = Polarity::positive;

  friend bool operator==(const TrainingExample& a, const TrainingExample& b) {
    return a.tag == b.tag && a.doc->id == b.doc->id && a.polarity == b.polarity;
  }
};

struct Shortfall {
  std::string tag;
  Polarity polarity = Polarity::positive;
  std::size_t requested = 0;
  std::size_t available = 0;
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
  std::vector<Shortfall> shortfalls;
};

/// Picks k_pos documents containing the tag and k_neg documents without it,
/// per tag. Candidates are ordered by document id and then shuffled with a
/// stream derived from (rng_seed, tag). Short tags yield what exists and a
/// Shortfall entry.
TrainingSet sample_training_set(const std::vector<AnnotatedDoc>& corpus,
                                const std::set<std::string>& tags, std::size_t k_pos,
                                std::size_t k_neg, std::uint64_t rng_seed);

/// One record per example: tag, doc_id, polarity, text, target JSON array.
nlohmann::ordered_json to_json(const TrainingExample& example);
nlohmann::ordered_json to_json(const Shortfall& shortfall);

struct OverlapRow {
  std::string benchmark;
  std::size_t overlapping = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  bool empty_test_set = false;

  /// Integer percent, rounded half up.
  int percent() const;
};

struct OverlapReport {
  std::vector<OverlapRow> rows;
  OverlapRow total;
};

OverlapReport compute_overlap(
    const std::set<std::string>& train_tags,
    const std::vector<std::pair<std::string, std::set<std::string>>>& test_tags);

nlohmann::ordered_json to_json(const OverlapReport& report);

/// Two-line table: "o/t" counts and integer percentages, one column per
/// benchmark plus TOT.
std::string render_overlap_table(const OverlapReport& report);

enum class SweepAxis { n_tags, n_examples_per_tag };

struct SweepOptions {
  // Held fixed while the other axis varies.
  std::size_t examples_per_tag = 10;  // split evenly into positives and negatives
  std::size_t n_tags = 50;
};

struct SweepStep {
  std::size_t step = 0;
  TrainingSet data;
  bool truncated = false;
};

/// Nested training sets: each step contains every example of the previous one.
/// Steps must be strictly increasing (ConfigError otherwise). A step beyond
/// what the corpus offers is truncated and flagged.
std::vector<SweepStep> build_sweep(const std::vector<AnnotatedDoc>& corpus,
                                   const std::set<std::string>& tags, SweepAxis axis,
                                   const std::vector<std::size_t>& steps, std::uint64_t rng_seed,
                                   const SweepOptions& options = {});

}  // namespace zsner::curation
