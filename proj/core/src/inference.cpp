#include "zsner/inference.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "zsner/digest.hpp"
#include "zsner/errors.hpp"
#include "zsner/output_parser.hpp"
#include "zsner/text.hpp"

namespace zsner::inference {

void ChunkConfig::validate() const {
  if (window_words < 1) throw ConfigError("window_words must be at least 1");
  if (overlap_words >= window_words) {
    throw ConfigError(fmt::format("overlap_words ({}) must be smaller than window_words ({})",
                                  overlap_words, window_words));
  }
}

ChunkPlan plan_chunks(std::string_view doc_id, std::string_view text, const ChunkConfig& config) {
  config.validate();
  ChunkPlan plan;
  plan.doc_id = std::string(doc_id);
  plan.window_words = config.window_words;
  plan.overlap_words = config.overlap_words;
  plan.n_words = text::split_words(text).size();
  const std::size_t stride = config.window_words - config.overlap_words;
  std::size_t start = 0;
  for (;;) {
    std::size_t end = std::min(start + config.window_words, plan.n_words);
    plan.windows.push_back({start, end});
    if (end == plan.n_words) break;
    start += stride;
  }
  return plan;
}

ChunkPlan plan_chunks(const AnnotatedDoc& doc, const ChunkConfig& config) {
  return plan_chunks(doc.id, doc.text, config);
}

std::string_view chunk_text(std::string_view text, const Window& window) {
  auto words = text::split_words(text);
  if (window.begin >= window.end || window.end > words.size()) return {};
  std::size_t b = words[window.begin].begin;
  std::size_t e = words[window.end - 1].end;
  return text.substr(b, e - b);
}

CallPlan build_call_plan(const std::vector<AnnotatedDoc>& docs, const std::vector<std::string>& tags,
                         const ChunkConfig& config) {
  if (tags.empty()) throw ConfigError("the call plan needs at least one tag");
  config.validate();
  CallPlan plan;
  plan.tags = tags;
  std::sort(plan.tags.begin(), plan.tags.end());
  plan.tags.erase(std::unique(plan.tags.begin(), plan.tags.end()), plan.tags.end());

  std::vector<const AnnotatedDoc*> ordered;
  for (const auto& d : docs) ordered.push_back(&d);
  std::sort(ordered.begin(), ordered.end(),
            [](const AnnotatedDoc* a, const AnnotatedDoc* b) { return a->id < b->id; });
  for (const auto* doc : ordered) {
    auto chunks = plan_chunks(*doc, config);
    for (std::size_t c = 0; c < chunks.windows.size(); ++c) {
      for (const auto& tag : plan.tags) plan.jobs.push_back({doc->id, c, tag});
    }
    plan.chunks.emplace(doc->id, std::move(chunks));
  }
  plan.n_docs = plan.chunks.size();
  plan.n_tags = plan.tags.size();
  plan.n_calls = plan.jobs.size();
  return plan;
}

nlohmann::ordered_json to_json(const CallPlan& plan) {
  nlohmann::ordered_json j;
  j["n_docs"] = plan.n_docs;
  j["n_tags"] = plan.n_tags;
  j["n_calls"] = plan.n_calls;
  j["tags"] = plan.tags;
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  for (const auto& [id, chunks] : plan.chunks) {
    nlohmann::ordered_json windows = nlohmann::ordered_json::array();
    for (const auto& w : chunks.windows) windows.push_back({w.begin, w.end});
    docs.push_back({{"doc_id", id},
                    {"n_words", chunks.n_words},
                    {"window_words", chunks.window_words},
                    {"overlap_words", chunks.overlap_words},
                    {"windows", std::move(windows)}});
  }
  j["documents"] = std::move(docs);
  return j;
}

SpanSet merge_chunk_predictions(const std::vector<SpanSet>& per_chunk) {
  SpanSet out;
  for (const auto& s : per_chunk) out.insert(s.begin(), s.end());
  return out;
}

CallCache::CallCache(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::string CallCache::key(const std::string& model_id, const std::string& prompt) {
  return sha256_hex(model_id + "\n" + prompt);
}

std::filesystem::path CallCache::path_for(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> CallCache::get(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (!j.is_object() || !j.contains("raw_output") || !j["raw_output"].is_string()) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
  return j["raw_output"].get<std::string>();
}

void CallCache::put(const std::string& key, const std::string& raw_output) {
  auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.' << std::random_device{}();
  auto tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write call cache entry '{}'", tmp.string()));
    nlohmann::json j{{"key", key}, {"raw_output", raw_output}};
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

bool CallCache::put_if_absent(const std::string& key, const std::string& raw_output) {
  if (std::filesystem::exists(path_for(key))) return false;
  put(key, raw_output);
  return true;
}

std::vector<std::string> missing_guidelines(const CallPlan& plan,
                                            const guidelines::DgCache& cache,
                                            const std::string& dataset) {
  std::vector<std::string> missing;
  for (const auto& tag : plan.tags) {
    if (!cache.lookup(tag, dataset)) missing.push_back(tag);
  }
  return missing;
}

namespace {

struct JobResult {
  std::string raw;
  ParsedOutput parsed;
  std::string error;
};

int severity(ParseStatus s) {
  switch (s) {
    case ParseStatus::clean:
      return 0;
    case ParseStatus::recovered:
      return 1;
    case ParseStatus::failed:
      return 2;
  }
  return 2;
}

}  // namespace

std::vector<Prediction> run_inference(const CallPlan& plan, const std::vector<AnnotatedDoc>& docs,
                                      const prompting::TemplateSet& templates,
                                      const guidelines::DgCache& dg, LlmClient& client,
                                      const RunConfig& config, RunStatistics* stats) {
  const bool with_dg = config.variant == prompting::TemplateVariant::with_dg;
  if (with_dg) {
    auto missing = missing_guidelines(plan, dg, config.dataset);
    if (!missing.empty()) {
      throw ConfigError(fmt::format("no definition and guidelines for tags: {}",
                                    fmt::join(missing, ", ")));
    }
  }
  std::map<std::string, const AnnotatedDoc*> by_id;
  for (const auto& d : docs) by_id[d.id] = &d;

  const auto& tmpl = templates.task(config.variant);
  std::map<std::string, DefGuidelines> dg_by_tag;
  if (with_dg) {
    for (const auto& tag : plan.tags) dg_by_tag[tag] = dg.lookup(tag, config.dataset)->dg;
  }

  // Render every prompt before dispatch so failures surface early.
  std::vector<std::string> prompts;
  prompts.reserve(plan.jobs.size());
  std::map<std::pair<std::string, std::size_t>, std::string_view> chunk_cache;
  for (const auto& job : plan.jobs) {
    auto [slot, fresh] = chunk_cache.try_emplace({job.doc_id, job.chunk_index});
    if (fresh) {
      auto doc_it = by_id.find(job.doc_id);
      if (doc_it == by_id.end()) {
        throw DataError(fmt::format("call plan references unknown document '{}'", job.doc_id));
      }
      const auto& window = plan.chunks.at(job.doc_id).windows.at(job.chunk_index);
      slot->second = chunk_text(doc_it->second->text, window);
    }
    auto chunk = slot->second;
    const DefGuidelines* entry = with_dg ? &dg_by_tag.at(job.tag) : nullptr;
    prompts.push_back(
        prompting::render_task_prompt(tmpl, chunk, job.tag, entry, job.doc_id, job.chunk_index)
            .text);
  }

  std::optional<CallCache> cache;
  if (config.cache_dir) cache.emplace(*config.cache_dir);

  std::vector<JobResult> results(plan.jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<std::size_t> sent{0};
  std::atomic<std::size_t> hits{0};
  std::atomic<std::size_t> failed{0};
  std::mutex error_mutex;
  std::exception_ptr abort_error;
  const std::string model = client.model_id();

  auto worker = [&] {
    for (std::size_t i = next++; i < plan.jobs.size(); i = next++) {
      auto& result = results[i];
      try {
        const auto key = CallCache::key(model, prompts[i]);
        std::optional<std::string> cached;
        if (cache && config.resume) cached = cache->get(key);
        if (cached) {
          result.raw = std::move(*cached);
          ++hits;
        } else {
          ++sent;
          try {
            result.raw = complete_with_retry(client, ChatRequest::user(prompts[i]), config.retry,
                                             config.sleeper);
            if (cache) cache->put(key, result.raw);
          } catch (const TransportError& e) {
            ++failed;
            result.error = e.what();
            result.parsed = {{}, ParseStatus::failed};
          }
        }
        if (result.error.empty()) result.parsed = parse_model_output(result.raw);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!abort_error) abort_error = std::current_exception();
        next = plan.jobs.size();
        return;
      }
      auto finished = ++done;
      if (config.progress) config.progress(finished, plan.jobs.size());
    }
  };
  std::size_t n_threads =
      std::clamp<std::size_t>(config.concurrency, 1, std::max<std::size_t>(1, plan.jobs.size()));
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
  }
  if (stats) *stats = {sent.load(), hits.load(), failed.load()};
  if (abort_error) std::rethrow_exception(abort_error);

  // Jobs are ordered (doc, chunk, tag); regroup per (doc, tag) in chunk order.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < plan.jobs.size(); ++i) {
    groups[{plan.jobs[i].doc_id, plan.jobs[i].tag}].push_back(i);
  }
  std::vector<Prediction> preds;
  preds.reserve(groups.size());
  for (const auto& [key, indices] : groups) {
    Prediction p;
    p.doc_id = key.first;
    p.tag = key.second;
    ParseStatus worst = ParseStatus::clean;
    std::vector<SpanSet> per_chunk;
    std::vector<std::string> errors;
    nlohmann::json raws = nlohmann::json::array();
    for (std::size_t idx : indices) {
      const auto& r = results[idx];
      if (severity(r.parsed.status) > severity(worst)) worst = r.parsed.status;
      per_chunk.push_back(r.parsed.spans);
      raws.push_back(r.raw);
      if (!r.error.empty()) {
        errors.push_back(indices.size() == 1
                             ? r.error
                             : fmt::format("chunk {}: {}", plan.jobs[idx].chunk_index, r.error));
      }
    }
    p.parse_status = worst;
    if (worst != ParseStatus::failed) p.spans = merge_chunk_predictions(per_chunk);
    p.raw_output = indices.size() == 1
                       ? results[indices.front()].raw
                       : raws.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    p.error = fmt::format("{}", fmt::join(errors, "; "));
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace zsner::inference
