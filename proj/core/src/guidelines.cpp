#include "zsner/guidelines.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "zsner/corpus_io.hpp"
#include "zsner/digest.hpp"
#include "zsner/errors.hpp"
#include "zsner/json_recovery.hpp"
#include "zsner/prompting.hpp"
#include "zsner/text.hpp"

namespace zsner::guidelines {

namespace {

DgKey key_of(const DefGuidelines& dg) { return {dg.dataset, dg.tag}; }

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::string> field_text(const nlohmann::json& obj, std::string_view wanted) {
  for (const auto& [key, value] : obj.items()) {
    if (text::ascii_lower(text::trim_ascii(key)) != wanted) continue;
    if (value.is_string()) return value.get<std::string>();
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!v.is_string()) continue;
        if (!joined.empty()) joined += ' ';
        joined += v.get<std::string>();
      }
      return joined;
    }
  }
  return std::nullopt;
}

std::optional<ParsedDg> from_object(const nlohmann::json& obj) {
  if (!obj.is_object()) return std::nullopt;
  auto def = field_text(obj, "definition");
  auto guide = field_text(obj, "guidelines");
  if (!def || !guide) return std::nullopt;
  ParsedDg out{text::trim_unicode(*def), text::trim_unicode(*guide)};
  if (out.definition.empty() || out.guidelines.empty()) return std::nullopt;
  return out;
}

// Finds a "label:" marker, case-insensitive, optionally wrapped in markdown
// emphasis. Returns [marker begin, content begin).
std::optional<std::pair<std::size_t, std::size_t>> find_label(const std::string& lower,
                                                              std::string_view label,
                                                              std::size_t from) {
  for (std::size_t pos = lower.find(label, from); pos != std::string::npos;
       pos = lower.find(label, pos + 1)) {
    std::size_t after = pos + label.size();
    while (after < lower.size() && (lower[after] == '*' || lower[after] == ' ')) ++after;
    if (after < lower.size() && lower[after] == ':') {
      std::size_t begin = pos;
      while (begin > 0 && lower[begin - 1] == '*') --begin;
      return std::make_pair(begin, after + 1);
    }
  }
  return std::nullopt;
}

std::string tidy(std::string_view s) {
  std::string t = text::trim_unicode(s);
  auto strip_edges = [&](std::string_view chars) {
    while (!t.empty() && chars.find(t.back()) != std::string_view::npos) t.pop_back();
    std::size_t b = 0;
    while (b < t.size() && chars.find(t[b]) != std::string_view::npos) ++b;
    t.erase(0, b);
  };
  strip_edges("*\"");
  t = text::trim_unicode(t);
  if (!t.empty() && t.back() == ',') t.pop_back();
  strip_edges("*\"");
  return text::trim_unicode(t);
}

std::optional<ParsedDg> from_labels(const std::string& raw) {
  std::string lower = text::ascii_lower(raw);
  auto def = find_label(lower, "definition", 0);
  if (!def) return std::nullopt;
  auto guide = find_label(lower, "guidelines", def->second);
  if (!guide) return std::nullopt;
  ParsedDg out{tidy(std::string_view(raw).substr(def->second, guide->first - def->second)),
               tidy(std::string_view(raw).substr(guide->second))};
  if (out.definition.empty() || out.guidelines.empty()) return std::nullopt;
  return out;
}

}  // namespace

DgCache::DgCache(const DgCache& other) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
}

DgCache& DgCache::operator=(const DgCache& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  entries_ = other.entries_;
  return *this;
}

bool DgCache::insert_if_absent(DgEntry entry) {
  entry.dg.validate();
  std::lock_guard lock(mutex_);
  return entries_.emplace(key_of(entry.dg), std::move(entry)).second;
}

bool DgCache::upsert(DgEntry entry) {
  entry.dg.validate();
  std::lock_guard lock(mutex_);
  auto key = key_of(entry.dg);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_.emplace(std::move(key), std::move(entry));
    return true;
  }
  if (it->second.dg.origin == DgOrigin::handwritten && entry.dg.origin == DgOrigin::generated) {
    return false;
  }
  if (it->second == entry) return false;
  it->second = std::move(entry);
  return true;
}

std::optional<DgEntry> DgCache::get(const DgKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<DgEntry> DgCache::lookup(const std::string& tag, const std::string& dataset) const {
  if (!dataset.empty()) {
    if (auto e = get({dataset, tag})) return e;
  }
  return get({"", tag});
}

std::size_t DgCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<DgEntry> DgCache::entries() const {
  std::lock_guard lock(mutex_);
  std::vector<DgEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry);
  return out;
}

DgCache import_dg(const std::filesystem::path& path) {
  DgCache cache;
  read_jsonl(path, [&](const nlohmann::json& record, std::size_t) {
    DgEntry entry{def_guidelines_from_json(record), std::nullopt};
    if (auto it = record.find("provenance"); it != record.end() && it->is_object()) {
      entry.provenance = Provenance{it->value("model_id", ""), it->value("timestamp", ""),
                                    it->value("prompt_hash", "")};
    }
    auto tag = entry.dg.tag;
    auto dataset = entry.dg.dataset;
    if (!cache.insert_if_absent(std::move(entry))) {
      throw ValidationError(fmt::format("duplicate D&G entry for tag '{}'{}", tag,
                                        dataset.empty() ? "" : " in dataset '" + dataset + "'"));
    }
  });
  return cache;
}

void export_dg(const DgCache& cache, const std::filesystem::path& path,
               const std::optional<FileMetadata>& meta) {
  std::vector<nlohmann::ordered_json> records;
  for (const auto& e : cache.entries()) {
    auto j = to_json(e.dg);
    if (e.provenance) {
      j["provenance"] = {{"model_id", e.provenance->model_id},
                         {"timestamp", e.provenance->timestamp},
                         {"prompt_hash", e.provenance->prompt_hash}};
    }
    records.push_back(std::move(j));
  }
  write_jsonl(path, records, meta);
}

std::optional<ParsedDg> parse_dg_response(const std::string& raw) {
  auto whole = nlohmann::json::parse(raw, nullptr, false);
  if (auto dg = from_object(whole)) return dg;
  for (const auto& cand : scan_json_candidates(raw, '{')) {
    if (!cand.terminated) continue;
    auto j = nlohmann::json::parse(raw.substr(cand.begin, cand.end - cand.begin), nullptr, false);
    if (auto dg = from_object(j)) return dg;
  }
  return from_labels(raw);
}

DgGenerator::DgGenerator(LlmClient& client, DgCache& cache, std::string guideline_template,
                         GeneratorOptions options, Sleeper sleeper)
    : client_(client),
      cache_(cache),
      template_(std::move(guideline_template)),
      options_(std::move(options)),
      sleeper_(std::move(sleeper)) {}

std::mutex& DgGenerator::tag_mutex(const std::string& tag) {
  std::lock_guard lock(state_mutex_);
  auto& slot = tag_mutexes_[tag];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::size_t DgGenerator::llm_calls() const {
  std::lock_guard lock(state_mutex_);
  return calls_;
}

DefGuidelines DgGenerator::generate(const std::string& tag,
                                    const std::vector<AnnotatedDoc>& corpus) {
  std::lock_guard tag_lock(tag_mutex(tag));
  auto existing = cache_.get({"", tag});
  if (existing && existing->dg.origin == DgOrigin::handwritten) return existing->dg;

  auto examples = prompting::sample_guideline_examples(corpus, tag, options_.rng_seed);
  auto prompt = prompting::render_guideline_prompt(template_, tag, examples);
  auto prompt_hash = sha256_hex(client_.model_id() + "\n" + prompt);
  if (existing && existing->provenance && existing->provenance->prompt_hash == prompt_hash) {
    return existing->dg;
  }

  auto ask = [&](const std::string& text) {
    {
      std::lock_guard lock(state_mutex_);
      ++calls_;
    }
    return complete_with_retry(client_, ChatRequest::user(text), options_.retry, sleeper_);
  };

  auto raw = ask(prompt);
  auto parsed = parse_dg_response(raw);
  if (!parsed) {
    raw = ask(prompt + "\n\n" + options_.format_reminder);
    parsed = parse_dg_response(raw);
  }
  if (!parsed) {
    throw ValidationError(fmt::format(
        "response for tag '{}' lacks a usable Definition and Guidelines; raw response: {}", tag,
        raw));
  }
  DefGuidelines dg{tag, parsed->definition, parsed->guidelines, DgOrigin::generated, ""};
  cache_.upsert({dg, Provenance{client_.model_id(), utc_timestamp(), prompt_hash}});
  return dg;
}

GenerationOutcome generate_all(DgGenerator& generator, const std::vector<std::string>& tags,
                               const std::vector<AnnotatedDoc>& corpus, std::size_t concurrency) {
  GenerationOutcome outcome;
  std::mutex outcome_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr unexpected;
  auto worker = [&] {
    for (std::size_t i = next++; i < tags.size(); i = next++) {
      const auto& tag = tags[i];
      try {
        generator.generate(tag, corpus);
        std::lock_guard lock(outcome_mutex);
        outcome.generated.push_back(tag);
      } catch (const DataError& e) {
        std::lock_guard lock(outcome_mutex);
        outcome.skipped[tag] = e.what();
      } catch (const TransportError& e) {
        std::lock_guard lock(outcome_mutex);
        outcome.transport_failed[tag] = e.what();
      } catch (const ValidationError& e) {
        std::lock_guard lock(outcome_mutex);
        outcome.invalid[tag] = e.what();
      } catch (...) {
        std::lock_guard lock(outcome_mutex);
        if (!unexpected) unexpected = std::current_exception();
        next = tags.size();
      }
    }
  };
  std::size_t n_threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(1, tags.size()));
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  threads.clear();
  if (unexpected) std::rethrow_exception(unexpected);
  std::sort(outcome.generated.begin(), outcome.generated.end());
  return outcome;
}

}  // namespace zsner::guidelines
