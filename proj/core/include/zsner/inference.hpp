#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/guidelines.hpp"
#include "zsner/llm_client.hpp"
#include "zsner/model.hpp"
#include "zsner/prompting.hpp"

namespace zsner::inference {

/// Half-open interval of word indices.
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const Window&, const Window&) = default;
};

struct ChunkConfig {
  std::size_t window_words = 900;
  std::size_t overlap_words = 0;

  void validate() const;  // ConfigError unless window >= 1 and overlap < window
};

struct ChunkPlan {
  std::string doc_id;
  std::vector<Window> windows;
  std::size_t window_words = 900;
  std::size_t overlap_words = 0;
  std::size_t n_words = 0;
};

/// Sliding windows of `window_words` words advancing by window - overlap. An
/// empty document yields a single empty window.
ChunkPlan plan_chunks(const AnnotatedDoc& doc, const ChunkConfig& config);
ChunkPlan plan_chunks(std::string_view doc_id, std::string_view text, const ChunkConfig& config);

/// The verbatim text covered by `window`, from the first byte of its first
/// word to the last byte of its last word.
std::string_view chunk_text(std::string_view text, const Window& window);

struct Job {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string tag;

  friend auto operator<=>(const Job&, const Job&) = default;
};

struct CallPlan {
  std::vector<Job> jobs;  // sorted by (doc_id, chunk_index, tag)
  std::map<std::string, ChunkPlan> chunks;
  std::vector<std::string> tags;
  std::size_t n_docs = 0;
  std::size_t n_tags = 0;
  std::size_t n_calls = 0;
};

/// Cartesian product of every document chunk with every tag. `tags` must be
/// non-empty (ConfigError).
CallPlan build_call_plan(const std::vector<AnnotatedDoc>& docs, const std::vector<std::string>& tags,
                         const ChunkConfig& config);

nlohmann::ordered_json to_json(const CallPlan& plan);

/// Set union.
SpanSet merge_chunk_predictions(const std::vector<SpanSet>& per_chunk);

/// Content-addressed store of raw generations, one file per prompt hash under
/// `root/<first two hex>/<hash>.json`. Writes go through a temp file and a
/// rename so concurrent writers of the same key are harmless.
class CallCache {
 public:
  explicit CallCache(std::filesystem::path root);

  static std::string key(const std::string& model_id, const std::string& prompt);

  std::optional<std::string> get(const std::string& key) const;
  bool put_if_absent(const std::string& key, const std::string& raw_output);
  void put(const std::string& key, const std::string& raw_output);

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path root_;
};

struct RunConfig {
  prompting::TemplateVariant variant = prompting::TemplateVariant::with_dg;
  std::size_t concurrency = 4;
  bool resume = true;
  std::optional<std::filesystem::path> cache_dir;  // no call cache when unset
  RetryPolicy retry;
  std::string dataset;  // scope used for D&G lookup
  Sleeper sleeper = real_sleeper();
  // Called after each finished job with (done, total); may be empty.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Tags of the plan that have no D&G entry under `dataset`.
std::vector<std::string> missing_guidelines(const CallPlan& plan,
                                            const guidelines::DgCache& cache,
                                            const std::string& dataset = {});

struct RunStatistics {
  std::size_t sent = 0;        // requests that reached the client
  std::size_t cache_hits = 0;  // jobs answered from the call cache
  std::size_t failed = 0;      // jobs that ended in a transport failure
};

/// Executes the plan and returns one Prediction per (doc, tag), sorted by
/// (doc_id, tag).
///
/// Transport failures after retries become failed Predictions; any other
/// exception from the client aborts the run after in-flight jobs finish.
/// Already-cached jobs are not re-sent when `resume` is set. Missing D&G for
/// a with_dg run is a ConfigError raised before any call.
std::vector<Prediction> run_inference(const CallPlan& plan, const std::vector<AnnotatedDoc>& docs,
                                      const prompting::TemplateSet& templates,
                                      const guidelines::DgCache& dg, LlmClient& client,
                                      const RunConfig& config, RunStatistics* stats = nullptr);

}  // namespace zsner::inference
