#include "zsner/curation.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "zsner/errors.hpp"
#include "zsner/prompting.hpp"
#include "zsner/random.hpp"
#include "zsner/text.hpp"

namespace zsner::curation {

namespace {

std::string clean_label(std::string_view label) {
  return text::ascii_lower(text::trim_ascii(label));
}

template <typename Json>
std::set<std::string> string_set(const Json& j, std::string_view field) {
  std::set<std::string> out;
  if (!j.is_array()) throw ConfigError(fmt::format("'{}' must be a list of strings", field));
  for (const auto& v : j) {
    if (!v.is_string()) throw ConfigError(fmt::format("'{}' must be a list of strings", field));
    out.insert(clean_label(v.template get<std::string>()));
  }
  return out;
}

// Documents containing / lacking the tag, ordered by id.
std::pair<std::vector<const AnnotatedDoc*>, std::vector<const AnnotatedDoc*>> split_by_tag(
    const std::vector<AnnotatedDoc>& corpus, const std::string& tag) {
  std::vector<const AnnotatedDoc*> pos;
  std::vector<const AnnotatedDoc*> neg;
  for (const auto& doc : corpus) (doc.span_count(tag) > 0 ? pos : neg).push_back(&doc);
  auto by_id = [](const AnnotatedDoc* a, const AnnotatedDoc* b) { return a->id < b->id; };
  std::sort(pos.begin(), pos.end(), by_id);
  std::sort(neg.begin(), neg.end(), by_id);
  return {std::move(pos), std::move(neg)};
}

struct TagPools {
  std::vector<const AnnotatedDoc*> positives;
  std::vector<const AnnotatedDoc*> negatives;
};

// Per-tag permutation that depends only on (seed, tag), so prefixes nest.
TagPools shuffled_pools(const std::vector<AnnotatedDoc>& corpus, const std::string& tag,
                        std::uint64_t seed) {
  auto [pos, neg] = split_by_tag(corpus, tag);
  auto rng = DeterministicRng::for_stream(seed, tag);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  return {std::move(pos), std::move(neg)};
}

void take(TrainingSet& out, const std::string& tag, const std::vector<const AnnotatedDoc*>& pool,
          std::size_t k, Polarity polarity) {
  std::size_t n = std::min(k, pool.size());
  for (std::size_t i = 0; i < n; ++i) out.examples.push_back({tag, pool[i], polarity});
  if (n < k) out.shortfalls.push_back({tag, polarity, k, pool.size()});
}

}  // namespace

void CurationConfig::validate() const {
  if (min_support < 1) throw ConfigError("min_support must be at least 1");
  if (k_pos + k_neg < 1) throw ConfigError("k_pos + k_neg must be at least 1");
  for (const auto& tag : blocklist) {
    if (keep_despite_overlap.count(tag) != 0) {
      throw ConfigError(fmt::format("'{}' is both blocklisted and kept despite overlap", tag));
    }
  }
  for (const auto& [alias, canonical] : alias_map) {
    if (alias_map.count(canonical) != 0) {
      throw ConfigError(fmt::format("alias chain: '{}' -> '{}' -> '{}'", alias, canonical,
                                    alias_map.at(canonical)));
    }
  }
}

CurationConfig curation_config_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ConfigError("curation config must be an object");
  CurationConfig c;
  auto count = [&](const char* key, std::size_t& field) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw ConfigError(fmt::format("'{}' must be a non-negative integer", key));
      }
      field = it->get<std::size_t>();
    }
  };
  count("min_support", c.min_support);
  count("k_pos", c.k_pos);
  count("k_neg", c.k_neg);
  if (auto it = j.find("rng_seed"); it != j.end()) {
    if (!it->is_number_integer()) throw ConfigError("'rng_seed' must be an integer");
    c.rng_seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("source"); it != j.end() && it->is_string()) c.source = it->get<std::string>();
  if (auto it = j.find("alias_map"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("'alias_map' must map alias -> canonical");
    for (const auto& [alias, canonical] : it->items()) {
      if (!canonical.is_string()) throw ConfigError("'alias_map' values must be strings");
      c.alias_map[clean_label(alias)] = clean_label(canonical.get<std::string>());
    }
  }
  if (auto it = j.find("blocklist"); it != j.end()) c.blocklist = string_set(*it, "blocklist");
  if (auto it = j.find("keep_despite_overlap"); it != j.end()) {
    c.keep_despite_overlap = string_set(*it, "keep_despite_overlap");
  }
  if (auto it = j.find("test_tags"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("'test_tags' must map benchmark -> list of tags");
    for (const auto& [bench, tags] : it->items()) {
      c.test_tags.emplace_back(bench, string_set(tags, "test_tags." + bench));
    }
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const CurationConfig& c) {
  nlohmann::ordered_json j;
  j["min_support"] = c.min_support;
  j["alias_map"] = c.alias_map;
  j["blocklist"] = c.blocklist;
  nlohmann::ordered_json tests = nlohmann::ordered_json::object();
  for (const auto& [bench, tags] : c.test_tags) tests[bench] = tags;
  j["test_tags"] = std::move(tests);
  j["keep_despite_overlap"] = c.keep_despite_overlap;
  j["k_pos"] = c.k_pos;
  j["k_neg"] = c.k_neg;
  j["rng_seed"] = c.rng_seed;
  j["source"] = c.source;
  return j;
}

CurationConfig load_curation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open curation config '{}'", path.string()));
  auto j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("'{}' is not valid JSON", path.string()));
  return curation_config_from_json(j);
}

std::map<std::string, std::size_t> tag_support(const std::vector<AnnotatedDoc>& corpus) {
  std::map<std::string, std::size_t> support;
  for (const auto& doc : corpus) {
    for (const auto& [tag, spans] : doc.gold) support[tag] += spans.size();
  }
  return support;
}

std::set<std::string> filter_by_support(const std::vector<AnnotatedDoc>& corpus,
                                        std::size_t min_support) {
  std::set<std::string> out;
  for (const auto& [tag, n] : tag_support(corpus)) {
    if (n >= min_support && n > 0) out.insert(tag);
  }
  return out;
}

std::vector<EntityTag> canonicalize_tags(const std::set<std::string>& tags,
                                         const std::map<std::string, std::string>& alias_map,
                                         const std::set<std::string>& blocklist,
                                         const std::string& source) {
  for (const auto& [alias, canonical] : alias_map) {
    if (alias_map.count(canonical) != 0) {
      throw ConfigError(fmt::format("alias chain: '{}' -> '{}' -> '{}'", alias, canonical,
                                    alias_map.at(canonical)));
    }
  }
  std::map<std::string, EntityTag> merged;
  for (const auto& raw : tags) {
    std::string label = clean_label(raw);
    if (label.empty()) continue;
    auto it = alias_map.find(label);
    const std::string& canonical = it == alias_map.end() ? label : it->second;
    if (blocklist.count(label) != 0 || blocklist.count(canonical) != 0) continue;
    auto& tag = merged[canonical];
    tag.canonical = canonical;
    tag.source = source;
    if (raw != canonical) tag.aliases.insert(raw);
  }
  std::vector<EntityTag> out;
  out.reserve(merged.size());
  for (auto& [name, tag] : merged) {
    tag.validate();
    out.push_back(std::move(tag));
  }
  return out;
}

std::vector<AnnotatedDoc> relabel_corpus(const std::vector<AnnotatedDoc>& corpus,
                                         const std::vector<EntityTag>& tags) {
  std::map<std::string, std::string> to_canonical;
  for (const auto& t : tags) {
    to_canonical[t.canonical] = t.canonical;
    for (const auto& a : t.aliases) to_canonical[a] = t.canonical;
  }
  std::vector<AnnotatedDoc> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) {
    AnnotatedDoc copy{doc.id, doc.text, {}};
    for (const auto& [tag, spans] : doc.gold) {
      auto it = to_canonical.find(tag);
      if (it == to_canonical.end()) it = to_canonical.find(clean_label(tag));
      if (it == to_canonical.end()) continue;
      auto& list = copy.gold[it->second];
      list.insert(list.end(), spans.begin(), spans.end());
    }
    normalize_gold(copy);
    out.push_back(std::move(copy));
  }
  return out;
}

std::set<std::string> exclude_test_overlap(
    const std::set<std::string>& tags,
    const std::vector<std::pair<std::string, std::set<std::string>>>& test_tags,
    const std::set<std::string>& keep) {
  std::set<std::string> out;
  for (const auto& tag : tags) {
    bool in_test = std::any_of(test_tags.begin(), test_tags.end(),
                               [&](const auto& bench) { return bench.second.count(tag) != 0; });
    if (!in_test || keep.count(tag) != 0) out.insert(tag);
  }
  return out;
}

std::string_view to_string(Polarity p) {
  return p == Polarity::positive ? "positive" : "negative";
}

TrainingSet sample_training_set(const std::vector<AnnotatedDoc>& corpus,
                                const std::set<std::string>& tags, std::size_t k_pos,
                                std::size_t k_neg, std::uint64_t rng_seed) {
  if (k_pos + k_neg < 1) throw ConfigError("k_pos + k_neg must be at least 1");
  TrainingSet out;
  out.examples.reserve(tags.size() * (k_pos + k_neg));
  for (const auto& tag : tags) {
    auto pools = shuffled_pools(corpus, tag, rng_seed);
    take(out, tag, pools.positives, k_pos, Polarity::positive);
    take(out, tag, pools.negatives, k_neg, Polarity::negative);
  }
  return out;
}

nlohmann::ordered_json to_json(const TrainingExample& example) {
  nlohmann::ordered_json j;
  j["tag"] = example.tag;
  j["doc_id"] = example.doc->id;
  j["polarity"] = std::string(to_string(example.polarity));
  j["text"] = example.doc->text;
  auto it = example.doc->gold.find(example.tag);
  static const std::vector<std::string> kNone;
  j["target"] = prompting::render_target(it == example.doc->gold.end() ? kNone : it->second);
  return j;
}

nlohmann::ordered_json to_json(const Shortfall& s) {
  nlohmann::ordered_json j;
  j["tag"] = s.tag;
  j["polarity"] = std::string(to_string(s.polarity));
  j["requested"] = s.requested;
  j["available"] = s.available;
  return j;
}

int OverlapRow::percent() const {
  if (total == 0) return 0;
  return static_cast<int>((200 * overlapping + total) / (2 * total));
}

OverlapReport compute_overlap(
    const std::set<std::string>& train_tags,
    const std::vector<std::pair<std::string, std::set<std::string>>>& test_tags) {
  OverlapReport report;
  report.total.benchmark = "TOT";
  for (const auto& [bench, tags] : test_tags) {
    OverlapRow row;
    row.benchmark = bench;
    row.total = tags.size();
    row.overlapping = static_cast<std::size_t>(std::count_if(
        tags.begin(), tags.end(), [&](const std::string& t) { return train_tags.count(t) != 0; }));
    row.empty_test_set = row.total == 0;
    row.fraction = row.total == 0 ? 0.0 : static_cast<double>(row.overlapping) / row.total;
    report.total.overlapping += row.overlapping;
    report.total.total += row.total;
    report.rows.push_back(std::move(row));
  }
  auto& tot = report.total;
  tot.empty_test_set = tot.total == 0;
  tot.fraction = tot.total == 0 ? 0.0 : static_cast<double>(tot.overlapping) / tot.total;
  return report;
}

nlohmann::ordered_json to_json(const OverlapReport& report) {
  auto row_json = [](const OverlapRow& r) {
    nlohmann::ordered_json j;
    j["benchmark"] = r.benchmark;
    j["overlapping"] = r.overlapping;
    j["total"] = r.total;
    j["fraction"] = r.fraction;
    j["percent"] = r.percent();
    if (r.empty_test_set) j["empty_test_set"] = true;
    return j;
  };
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_json(r));
  j["total"] = row_json(report.total);
  return j;
}

std::string render_overlap_table(const OverlapReport& report) {
  std::vector<const OverlapRow*> cols;
  for (const auto& r : report.rows) cols.push_back(&r);
  cols.push_back(&report.total);
  std::vector<std::string> head, counts, pct;
  for (const auto* r : cols) {
    head.push_back(r->benchmark + (r->empty_test_set ? "*" : ""));
    counts.push_back(fmt::format("{}/{}", r->overlapping, r->total));
    pct.push_back(fmt::format("{}%", r->percent()));
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::size_t w = std::max({head[i].size(), counts[i].size(), pct[i].size()});
      out += fmt::format("{}{:>{}}", i == 0 ? "" : " | ", cells[i], w);
    }
    out += '\n';
  };
  line(head);
  line(counts);
  line(pct);
  if (std::any_of(cols.begin(), cols.end(), [](const OverlapRow* r) { return r->empty_test_set; })) {
    out += "* empty test tag set, reported as 0%\n";
  }
  return out;
}

std::vector<SweepStep> build_sweep(const std::vector<AnnotatedDoc>& corpus,
                                   const std::set<std::string>& tags, SweepAxis axis,
                                   const std::vector<std::size_t>& steps, std::uint64_t rng_seed,
                                   const SweepOptions& options) {
  if (steps.empty()) throw ConfigError("sweep needs at least one step");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] == 0 || (i > 0 && steps[i] <= steps[i - 1])) {
      throw ConfigError("sweep steps must be positive and strictly increasing");
    }
  }
  // One fixed tag order for the whole sweep.
  std::vector<std::string> order(tags.begin(), tags.end());
  auto rng = DeterministicRng::for_stream(rng_seed, "sweep/tag-order");
  rng.shuffle(std::span(order));

  std::vector<SweepStep> out;
  for (std::size_t step : steps) {
    SweepStep s;
    s.step = step;
    std::size_t n_tags = axis == SweepAxis::n_tags ? step : options.n_tags;
    std::size_t per_polarity =
        axis == SweepAxis::n_tags ? options.examples_per_tag / 2 : step;
    if (n_tags > order.size()) {
      s.truncated = true;
      n_tags = order.size();
    }
    for (std::size_t i = 0; i < n_tags; ++i) {
      auto pools = shuffled_pools(corpus, order[i], rng_seed);
      take(s.data, order[i], pools.positives, per_polarity, Polarity::positive);
      take(s.data, order[i], pools.negatives, per_polarity, Polarity::negative);
    }
    if (!s.data.shortfalls.empty()) s.truncated = true;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace zsner::curation
