#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "zsner/corpus_io.hpp"
#include "zsner/llm_client.hpp"
#include "zsner/model.hpp"

namespace zsner::guidelines {

struct Provenance {
  std::string model_id;
  std::string timestamp;  // ISO-8601 UTC
  std::string prompt_hash;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct DgKey {
  std::string dataset;
  std::string tag;

  friend auto operator<=>(const DgKey&, const DgKey&) = default;
};

struct DgEntry {
  DefGuidelines dg;
  std::optional<Provenance> provenance;  // absent for handwritten entries

  friend bool operator==(const DgEntry&, const DgEntry&) = default;
};

/// Tag -> D&G store. Every stored entry satisfies DefGuidelines invariants.
/// Thread-safe; handwritten entries are never displaced by generated ones.
class DgCache {
 public:
  DgCache() = default;
  DgCache(const DgCache& other);
  DgCache& operator=(const DgCache& other);

  /// Inserts when no entry exists for the key. Returns false when an entry was
  /// already present.
  bool insert_if_absent(DgEntry entry);

  /// Inserts or replaces, except that a generated entry never replaces a
  /// handwritten one. Returns whether the store changed.
  bool upsert(DgEntry entry);

  /// Exact (dataset, tag) entry.
  std::optional<DgEntry> get(const DgKey& key) const;

  /// Dataset-scoped entry if present, else the unscoped one.
  std::optional<DgEntry> lookup(const std::string& tag, const std::string& dataset = {}) const;

  std::size_t size() const;
  std::vector<DgEntry> entries() const;  // sorted by key

 private:
  mutable std::mutex mutex_;
  std::map<DgKey, DgEntry> entries_;
};

/// Reads a D&G file. Duplicate (dataset, tag) keys and invalid entries raise
/// ValidationError.
DgCache import_dg(const std::filesystem::path& path);

void export_dg(const DgCache& cache, const std::filesystem::path& path,
               const std::optional<FileMetadata>& meta = std::nullopt);

/// Extracts Definition/Guidelines from a model response: a JSON object (bare,
/// fenced, or embedded in prose) with case-insensitive keys, or a labelled
/// "Definition: ... Guidelines: ..." text. Returns nullopt when either field
/// is missing or blank.
struct ParsedDg {
  std::string definition;
  std::string guidelines;
};
std::optional<ParsedDg> parse_dg_response(const std::string& raw);

struct GeneratorOptions {
  std::uint64_t rng_seed = 0;
  RetryPolicy retry;
  std::string format_reminder =
      "Answer only with a JSON object with the two string fields \"Definition\" and "
      "\"Guidelines\".";
};

/// Generates D&G through an LLM, one request per tag, with caching.
///
/// The cache is keyed by tag; a generated entry is reused only when its
/// prompt hash matches the prompt that would be sent now. Calls for the same
/// tag are serialized.
class DgGenerator {
 public:
  DgGenerator(LlmClient& client, DgCache& cache, std::string guideline_template,
              GeneratorOptions options = {}, Sleeper sleeper = real_sleeper());

  /// Throws DataError (<3 positives), TransportError (after retries) or
  /// ValidationError (unusable response after one re-prompt; message carries
  /// the raw response).
  DefGuidelines generate(const std::string& tag, const std::vector<AnnotatedDoc>& corpus);

  std::size_t llm_calls() const;

 private:
  std::mutex& tag_mutex(const std::string& tag);

  LlmClient& client_;
  DgCache& cache_;
  std::string template_;
  GeneratorOptions options_;
  Sleeper sleeper_;
  mutable std::mutex state_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> tag_mutexes_;
  std::size_t calls_ = 0;
};

struct GenerationOutcome {
  std::vector<std::string> generated;               // tags now in the cache
  std::map<std::string, std::string> skipped;       // fewer than 3 positives
  std::map<std::string, std::string> transport_failed;
  std::map<std::string, std::string> invalid;       // unusable responses
};

/// Runs generate() for each tag with up to `concurrency` requests in flight.
/// Per-tag failures are collected instead of aborting the batch.
GenerationOutcome generate_all(DgGenerator& generator, const std::vector<std::string>& tags,
                               const std::vector<AnnotatedDoc>& corpus, std::size_t concurrency);

}  // namespace zsner::guidelines
