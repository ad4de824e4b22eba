#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "zsner/corpus_io.hpp"
#include "zsner/curation.hpp"
#include "zsner/digest.hpp"
#include "zsner/errors.hpp"
#include "zsner/guidelines.hpp"

namespace zsner::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kConfigKeys = {
    "corpus",   "dg_file",       "template_dir", "curation_config", "output_dir",
    "endpoint", "chunking",      "template_variant", "match_policy", "rng_seed",
    "concurrency", "call_budget", "resume",      "dataset",         "tags",
    "layout",   "label",         "benchmark",    "retry"};

std::size_t count_field(const json& j, const std::string& key, std::size_t fallback, std::size_t min = 0) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned() || it->get<std::uint64_t>() < min) {
    throw ConfigError(fmt::format("'{}' must be an integer >= {}", key, min));
  }
  return it->get<std::size_t>();
}

std::string string_field(const json& j, const std::string& key, std::string fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigError(fmt::format("'{}' must be a string", key));
  return it->get<std::string>();
}

std::string utc_stamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void require_file(const std::optional<fs::path>& path, std::string_view what) {
  if (!path) throw ConfigError(fmt::format("config does not set '{}'", what));
  if (!fs::exists(*path)) throw ConfigError(fmt::format("{} '{}' does not exist", what, path->string()));
}

struct Context {
  const RunConfig& config;
  fs::path run_dir;
  std::ostream& out;
  std::ostream& err;
  const Environment& env;

  FileMetadata meta(std::string kind, ordered_json extra = ordered_json::object()) const {
    return FileMetadata{std::move(kind), config.hash, config.rng_seed, std::string(tool_version()),
                        std::move(extra)};
  }

  void write_text(const std::string& name, std::string_view kind, const std::string& body) const {
    auto path = run_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(fmt::format("cannot write '{}'", path.string()));
    f << fmt::format("# zsner {} kind={} config={} seed={}\n", tool_version(), kind, config.hash,
                     config.rng_seed)
      << body;
  }

  std::unique_ptr<LlmClient> client() const {
    if (env.make_client) return env.make_client(config.endpoint);
    return std::make_unique<HttpChatClient>(config.endpoint);
  }

  Sleeper sleeper() const { return env.sleeper ? env.sleeper : real_sleeper(); }
};

fs::path make_run_dir(const RunConfig& config, const std::string& override_dir) {
  if (!override_dir.empty()) {
    fs::create_directories(override_dir);
    return override_dir;
  }
  auto base = config.output_dir / "runs" / fmt::format("{}-{}", utc_stamp(), config.hash.substr(0, 8));
  auto dir = base;
  for (int i = 2; fs::exists(dir); ++i) dir = fs::path(base.string() + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

std::vector<AnnotatedDoc> load_nonempty_corpus(const RunConfig& config) {
  require_file(config.corpus.empty() ? std::nullopt : std::optional(config.corpus), "corpus");
  auto docs = load_corpus(config.corpus);
  if (docs.empty()) throw DataError(fmt::format("corpus '{}' is empty", config.corpus.string()));
  return docs;
}

std::vector<std::string> resolve_tags(const RunConfig& config, const std::vector<AnnotatedDoc>& docs) {
  if (!config.tags.empty()) return config.tags;
  std::set<std::string> tags;
  for (const auto& d : docs) {
    for (const auto& [tag, _] : d.gold) tags.insert(tag);
  }
  if (tags.empty()) throw DataError("no tags given and the corpus annotates none");
  return {tags.begin(), tags.end()};
}

prompting::TemplateSet templates_for(const RunConfig& config) {
  if (!config.template_dir) return prompting::default_templates();
  require_file(config.template_dir, "template_dir");
  return prompting::load_templates(*config.template_dir);
}

guidelines::DgCache load_dg_sources(const RunConfig& config) {
  guidelines::DgCache cache;
  if (config.dg_file) {
    require_file(config.dg_file, "dg_file");
    for (auto& e : guidelines::import_dg(*config.dg_file).entries()) cache.insert_if_absent(std::move(e));
  }
  if (auto generated = config.output_dir / "dg_cache.jsonl"; fs::exists(generated)) {
    for (auto& e : guidelines::import_dg(generated).entries()) cache.insert_if_absent(std::move(e));
  }
  return cache;
}

// ---- curate ------------------------------------------------------------------

struct CurateFlags {
  std::vector<std::size_t> sweep_tags;
  std::vector<std::size_t> sweep_examples;
};

void write_training_set(const Context& ctx, const fs::path& path, const curation::TrainingSet& set,
                        ordered_json extra) {
  std::vector<ordered_json> records;
  records.reserve(set.examples.size());
  for (const auto& e : set.examples) records.push_back(curation::to_json(e));
  write_jsonl(path, records, ctx.meta("training_set", std::move(extra)));
}

int cmd_curate(const Context& ctx, const CurateFlags& flags) {
  const auto& config = ctx.config;
  require_file(config.curation_config, "curation_config");
  auto cur = curation::load_curation_config(*config.curation_config);
  if (config.raw.contains("rng_seed")) cur.rng_seed = config.rng_seed;
  auto docs = load_nonempty_corpus(config);

  std::set<std::string> raw_tags;
  for (const auto& [tag, _] : curation::tag_support(docs)) raw_tags.insert(tag);
  auto canon = curation::canonicalize_tags(raw_tags, cur.alias_map, cur.blocklist, cur.source);
  auto relabeled = curation::relabel_corpus(docs, canon);
  auto supported = curation::filter_by_support(relabeled, cur.min_support);
  auto eligible = curation::exclude_test_overlap(supported, cur.test_tags, cur.keep_despite_overlap);
  if (eligible.empty()) throw DataError("no tag survives the support, blocklist and overlap filters");

  auto set = curation::sample_training_set(relabeled, eligible, cur.k_pos, cur.k_neg, cur.rng_seed);
  write_training_set(ctx, ctx.run_dir / "training_set.jsonl", set,
                     {{"n_tags", eligible.size()}, {"k_pos", cur.k_pos}, {"k_neg", cur.k_neg}});

  std::vector<ordered_json> tag_records;
  for (const auto& t : canon) {
    if (eligible.count(t.canonical) == 0) continue;
    tag_records.push_back({{"canonical", t.canonical}, {"aliases", t.aliases}, {"source", t.source}});
  }
  write_jsonl(ctx.run_dir / "tags.jsonl", tag_records, ctx.meta("tags"));

  auto overlap = curation::compute_overlap(eligible, cur.test_tags);
  auto overlap_json = curation::to_json(overlap);
  std::vector<ordered_json> overlap_records(overlap_json["rows"].begin(), overlap_json["rows"].end());
  overlap_records.push_back(overlap_json["total"]);
  write_jsonl(ctx.run_dir / "overlap.jsonl", overlap_records, ctx.meta("overlap"));
  auto table = curation::render_overlap_table(overlap);
  ctx.write_text("overlap.txt", "overlap", table);

  if (!set.shortfalls.empty()) {
    std::vector<ordered_json> records;
    for (const auto& s : set.shortfalls) records.push_back(curation::to_json(s));
    write_jsonl(ctx.run_dir / "shortfalls.jsonl", records, ctx.meta("shortfalls"));
    ctx.err << fmt::format("warning: {} tag/polarity pairs had too few examples, see {}\n",
                           set.shortfalls.size(), (ctx.run_dir / "shortfalls.jsonl").string());
  }

  auto sweep = [&](curation::SweepAxis axis, const std::vector<std::size_t>& steps, std::string_view name) {
    if (steps.empty()) return;
    curation::SweepOptions options;
    options.examples_per_tag = cur.k_pos + cur.k_neg;
    options.n_tags = eligible.size();
    fs::create_directories(ctx.run_dir / "sweep");
    for (const auto& step : curation::build_sweep(relabeled, eligible, axis, steps, cur.rng_seed, options)) {
      write_training_set(ctx, ctx.run_dir / "sweep" / fmt::format("{}-{}.jsonl", name, step.step), step.data,
                         {{"axis", name}, {"step", step.step}, {"truncated", step.truncated}});
      if (step.truncated) {
        ctx.err << fmt::format("warning: sweep step {}={} was truncated\n", name, step.step);
      }
    }
  };
  sweep(curation::SweepAxis::n_tags, flags.sweep_tags, "n_tags");
  sweep(curation::SweepAxis::n_examples_per_tag, flags.sweep_examples, "examples_per_tag");

  ctx.out << fmt::format("{} of {} tags eligible; {} examples written to {}\n", eligible.size(),
                         raw_tags.size(), set.examples.size(),
                         (ctx.run_dir / "training_set.jsonl").string())
          << table;
  return kOk;
}

// ---- guidelines ----------------------------------------------------------------

int cmd_guidelines(const Context& ctx) {
  const auto& config = ctx.config;
  auto docs = load_nonempty_corpus(config);
  auto tags = resolve_tags(config, docs);
  auto templates = templates_for(config);
  auto cache = load_dg_sources(config);
  auto client = ctx.client();

  guidelines::GeneratorOptions options;
  options.rng_seed = config.rng_seed;
  options.retry = config.retry;
  guidelines::DgGenerator generator(*client, cache, templates.guideline_generation, options, ctx.sleeper());
  auto outcome = guidelines::generate_all(generator, tags, docs, config.concurrency);

  fs::create_directories(config.output_dir);
  guidelines::export_dg(cache, config.output_dir / "dg_cache.jsonl", ctx.meta("dg_cache"));
  guidelines::export_dg(cache, ctx.run_dir / "dg.jsonl", ctx.meta("dg"));

  std::vector<ordered_json> report;
  auto add = [&](const std::map<std::string, std::string>& m, std::string_view kind) {
    for (const auto& [tag, reason] : m) report.push_back({{"tag", tag}, {"kind", kind}, {"reason", reason}});
  };
  add(outcome.skipped, "skipped");
  add(outcome.transport_failed, "transport_failed");
  add(outcome.invalid, "invalid");
  write_jsonl(ctx.run_dir / "dg_skipped.jsonl", report, ctx.meta("dg_skip_report"));

  ctx.out << fmt::format("{} tags with D&G, {} skipped, {} transport failures, {} invalid; {} LLM calls\n",
                         outcome.generated.size(), outcome.skipped.size(), outcome.transport_failed.size(),
                         outcome.invalid.size(), generator.llm_calls());
  for (const auto& [tag, reason] : outcome.skipped) ctx.err << fmt::format("skipped '{}': {}\n", tag, reason);
  if (!outcome.transport_failed.empty()) return kTransport;
  if (!outcome.invalid.empty()) return kValidation;
  return kOk;
}

// ---- infer ---------------------------------------------------------------------

struct InferFlags {
  bool yes = false;
};

bool confirm(const Context& ctx, std::size_t n_calls) {
  if (!ctx.env.interactive || ctx.env.in == nullptr) return false;
  ctx.out << fmt::format("{} calls exceed the budget of {}. Proceed? [y/N] ", n_calls, ctx.config.call_budget)
          << std::flush;
  std::string answer;
  std::getline(*ctx.env.in, answer);
  return answer == "y" || answer == "Y" || answer == "yes";
}

int cmd_infer(const Context& ctx, const InferFlags& flags) {
  const auto& config = ctx.config;
  auto docs = load_nonempty_corpus(config);
  auto tags = resolve_tags(config, docs);
  auto templates = templates_for(config);
  auto plan = inference::build_call_plan(docs, tags, config.chunking);

  std::size_t n_chunks = 0;
  for (const auto& [_, c] : plan.chunks) n_chunks += c.windows.size();
  ctx.out << fmt::format("{} calls planned ({} docs, {} chunks, {} tags)\n", plan.n_calls, plan.n_docs,
                         n_chunks, plan.n_tags);
  write_jsonl(ctx.run_dir / "plan.jsonl", {inference::to_json(plan)}, ctx.meta("call_plan"));

  if (plan.n_calls > config.call_budget && !flags.yes && !confirm(ctx, plan.n_calls)) {
    throw ConfigError(fmt::format("{} calls exceed the budget of {}; pass --yes to proceed", plan.n_calls,
                                  config.call_budget));
  }

  guidelines::DgCache dg;
  if (config.variant == prompting::TemplateVariant::with_dg) {
    dg = load_dg_sources(config);
    if (auto missing = inference::missing_guidelines(plan, dg, config.dataset); !missing.empty()) {
      throw ConfigError(fmt::format("no definition and guidelines for tags: {}", fmt::join(missing, ", ")));
    }
  }

  auto client = ctx.client();
  inference::RunConfig rc;
  rc.variant = config.variant;
  rc.concurrency = config.concurrency;
  rc.resume = config.resume;
  rc.cache_dir = config.output_dir / "call_cache";
  rc.retry = config.retry;
  rc.dataset = config.dataset;
  rc.sleeper = ctx.sleeper();

  inference::RunStatistics stats;
  auto preds = inference::run_inference(plan, docs, templates, dg, *client, rc, &stats);
  save_predictions(preds, ctx.run_dir / "predictions.jsonl",
                   ctx.meta("predictions", {{"model", client->model_id()},
                                            {"template_variant", prompting::to_string(config.variant)},
                                            {"n_calls", plan.n_calls}}));

  std::size_t n_failed = 0;
  for (const auto& p : preds) n_failed += p.parse_status == ParseStatus::failed ? 1 : 0;
  ctx.out << fmt::format("{} predictions written to {}; {} sent, {} from cache, {} transport failures, {} failed\n",
                         preds.size(), (ctx.run_dir / "predictions.jsonl").string(), stats.sent,
                         stats.cache_hits, stats.failed, n_failed);
  return stats.failed > 0 ? kTransport : kOk;
}

// ---- eval ----------------------------------------------------------------------

struct EvalFlags {
  std::string predictions;
  std::string gold;
  std::vector<std::string> runs;
  bool strict = false;
};

std::vector<Prediction> load_run_predictions(const std::string& where) {
  fs::path p = where;
  if (fs::is_directory(p)) p /= "predictions.jsonl";
  if (!fs::exists(p)) throw ConfigError(fmt::format("predictions file '{}' does not exist", p.string()));
  return load_predictions(p);
}

int cmd_eval(const Context& ctx, const EvalFlags& flags) {
  const auto& config = ctx.config;
  std::vector<AnnotatedDoc> gold;
  if (!flags.gold.empty()) {
    require_file(fs::path(flags.gold), "gold corpus");
    gold = load_corpus(flags.gold);
  } else {
    gold = load_nonempty_corpus(config);
  }

  std::vector<std::string> sources = flags.runs;
  if (sources.empty()) {
    if (flags.predictions.empty()) throw ConfigError("eval needs --predictions or --runs");
    sources.push_back(flags.predictions);
  }

  std::vector<EvalReport> reports;
  std::size_t n_failed = 0;
  for (const auto& src : sources) {
    auto preds = load_run_predictions(src);
    for (const auto& p : preds) n_failed += p.parse_status == ParseStatus::failed ? 1 : 0;
    reports.push_back(evaluation::evaluate(gold, preds, config.match_policy));
  }

  std::string table;
  if (reports.size() == 1) {
    write_jsonl(ctx.run_dir / "report.jsonl", evaluation::report_records(reports.front()), ctx.meta("report"));
    table = evaluation::render_report(reports.front(), config.layout, config.label, config.benchmark);
  } else {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      write_jsonl(ctx.run_dir / fmt::format("report-{}.jsonl", i + 1), evaluation::report_records(reports[i]),
                  ctx.meta("report", {{"run", i + 1}}));
    }
    auto stats = evaluation::aggregate_runs(reports);
    auto j = evaluation::to_json(stats);
    write_jsonl(ctx.run_dir / "runs.jsonl", std::vector<ordered_json>(j.begin(), j.end()),
                ctx.meta("run_statistics", {{"n_runs", reports.size()}}));
    table = evaluation::render_runs(stats, config.layout, config.label, config.benchmark);
  }
  ctx.write_text(reports.size() == 1 ? "report.txt" : "runs.txt", "table", table);
  ctx.out << table;

  if (n_failed > 0) {
    ctx.err << fmt::format("{} predictions have parse_status failed\n", n_failed);
    if (flags.strict) return kValidation;
  }
  return kOk;
}

}  // namespace

nlohmann::json read_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("config file '{}' does not exist", path.string()));
  std::ifstream f(path);
  auto j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("config file '{}' is not valid JSON", path.string()));
  return j;
}

RunConfig run_config_from_json(const json& raw, const fs::path& base_dir) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  if (raw.contains("api_key")) {
    throw ConfigError("API keys are read from the environment only; remove 'api_key' from the config");
  }
  for (const auto& [key, _] : raw.items()) {
    if (kConfigKeys.count(key) == 0) throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
  RunConfig c;
  c.raw = raw;
  auto path_field = [&](const char* key) -> std::optional<fs::path> {
    auto it = raw.find(key);
    if (it == raw.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ConfigError(fmt::format("'{}' must be a path string", key));
    fs::path p = it->get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return p.lexically_normal();
  };
  if (auto p = path_field("corpus")) c.corpus = *p;
  c.dg_file = path_field("dg_file");
  c.template_dir = path_field("template_dir");
  c.curation_config = path_field("curation_config");
  c.output_dir = path_field("output_dir").value_or((base_dir / "runs").lexically_normal());

  if (auto it = raw.find("endpoint"); it != raw.end()) c.endpoint = endpoint_config_from_json(*it);
  if (auto it = raw.find("chunking"); it != raw.end()) {
    if (!it->is_object()) throw ConfigError("'chunking' must be an object");
    c.chunking.window_words = count_field(*it, "window_words", c.chunking.window_words);
    c.chunking.overlap_words = count_field(*it, "overlap_words", c.chunking.overlap_words);
  }
  c.chunking.validate();
  c.variant = prompting::template_variant_from_string(string_field(raw, "template_variant", "with_dg"));
  if (auto it = raw.find("match_policy"); it != raw.end()) {
    c.match_policy = evaluation::match_policy_from_json(*it);
  }
  if (auto it = raw.find("rng_seed"); it != raw.end()) {
    if (!it->is_number_unsigned()) throw ConfigError("'rng_seed' must be a non-negative integer");
    c.rng_seed = it->get<std::uint64_t>();
  }
  c.concurrency = count_field(raw, "concurrency", c.concurrency, 1);
  c.call_budget = count_field(raw, "call_budget", c.call_budget);
  if (auto it = raw.find("resume"); it != raw.end()) {
    if (!it->is_boolean()) throw ConfigError("'resume' must be a boolean");
    c.resume = it->get<bool>();
  }
  c.dataset = string_field(raw, "dataset", "");
  if (auto it = raw.find("tags"); it != raw.end()) {
    if (!it->is_array()) throw ConfigError("'tags' must be a list of strings");
    std::set<std::string> seen;
    for (const auto& t : *it) {
      if (!t.is_string() || t.get<std::string>().empty()) throw ConfigError("'tags' must be non-empty strings");
      if (seen.insert(t.get<std::string>()).second) c.tags.push_back(t.get<std::string>());
    }
  }
  auto layout = string_field(raw, "layout", "buster");
  if (layout == "ood") {
    c.layout = evaluation::ReportLayout::ood_table;
  } else if (layout == "buster") {
    c.layout = evaluation::ReportLayout::buster_table;
  } else {
    throw ConfigError("'layout' must be 'ood' or 'buster'");
  }
  c.label = string_field(raw, "label", c.label);
  c.benchmark = string_field(raw, "benchmark", c.benchmark);
  if (auto it = raw.find("retry"); it != raw.end()) {
    if (!it->is_object()) throw ConfigError("'retry' must be an object");
    c.retry.max_attempts = static_cast<int>(count_field(*it, "max_attempts", 3, 1));
    c.retry.initial_backoff = std::chrono::milliseconds(count_field(*it, "initial_backoff_ms", 500));
    if (auto m = it->find("multiplier"); m != it->end()) {
      if (!m->is_number() || m->get<double>() < 1.0) throw ConfigError("'retry.multiplier' must be >= 1");
      c.retry.multiplier = m->get<double>();
    }
  }
  c.hash = sha256_hex(raw.dump());
  return c;
}

int run(const std::vector<std::string>& args, const Environment& env) {
  std::ostream& out = env.out ? *env.out : std::cout;
  std::ostream& err = env.err ? *env.err : std::cerr;

  CLI::App app{"Zero-shot named entity recognition pipeline", "zsner"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  std::string config_path;
  std::string run_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--run-dir", run_dir, "Write outputs here instead of a new timestamped directory");
  };
  json overrides = json::object();
  auto tags_option = [&](CLI::App* sub) {
    sub->add_option_function<std::vector<std::string>>(
           "--tags", [&](const std::vector<std::string>& v) { overrides["tags"] = v; }, "Tags to process")
        ->delimiter(',');
  };
  auto concurrency_option = [&](CLI::App* sub) {
    sub->add_option_function<std::size_t>(
        "--concurrency", [&](std::size_t v) { overrides["concurrency"] = v; }, "Concurrent requests");
  };

  auto* curate = app.add_subcommand("curate", "Build the training set and the tag overlap report");
  common(curate);
  CurateFlags curate_flags;
  curate->add_option("--sweep-tags", curate_flags.sweep_tags, "Training sets with this many tags")->delimiter(',');
  curate->add_option("--sweep-examples", curate_flags.sweep_examples, "Training sets with this many examples per polarity")
      ->delimiter(',');

  auto* gl = app.add_subcommand("guidelines", "Generate definitions and guidelines for tags");
  common(gl);
  tags_option(gl);
  concurrency_option(gl);

  auto* infer = app.add_subcommand("infer", "Run per-tag extraction over a corpus");
  common(infer);
  tags_option(infer);
  concurrency_option(infer);
  InferFlags infer_flags;
  infer->add_flag("-y,--yes", infer_flags.yes, "Proceed even when the call budget is exceeded");
  infer->add_option_function<std::size_t>(
      "--window", [&](std::size_t v) { overrides["chunking"]["window_words"] = v; }, "Words per chunk");
  infer->add_option_function<std::size_t>(
      "--overlap", [&](std::size_t v) { overrides["chunking"]["overlap_words"] = v; }, "Words shared by consecutive chunks");
  infer->add_option_function<std::string>(
           "--variant", [&](const std::string& v) { overrides["template_variant"] = v; }, "with_dg or without_dg")
      ->check(CLI::IsMember({"with_dg", "without_dg"}));
  infer->add_option_function<std::size_t>(
      "--budget", [&](std::size_t v) { overrides["call_budget"] = v; }, "Calls allowed without confirmation");
  infer->add_flag_function("--resume,!--no-resume", [&](std::int64_t n) { overrides["resume"] = n > 0; },
                           "Reuse cached responses");

  auto* ev = app.add_subcommand("eval", "Score predictions against gold annotations");
  common(ev);
  EvalFlags eval_flags;
  ev->add_option("-p,--predictions", eval_flags.predictions, "Predictions file or run directory");
  ev->add_option("-g,--gold", eval_flags.gold, "Gold corpus (defaults to the config corpus)");
  ev->add_option("--runs", eval_flags.runs, "Run directories to aggregate as mean ± std");
  ev->add_flag("--strict", eval_flags.strict, "Fail when any prediction could not be parsed");
  ev->add_option_function<std::string>(
         "--layout", [&](const std::string& v) { overrides["layout"] = v; }, "ood or buster")
      ->check(CLI::IsMember({"ood", "buster"}));
  ev->add_option_function<std::string>(
      "--label", [&](const std::string& v) { overrides["label"] = v; }, "Row label");
  ev->add_option_function<std::string>(
      "--benchmark", [&](const std::string& v) { overrides["benchmark"] = v; }, "Column name for ood tables");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    auto raw = read_config_file(config_path);
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    for (auto& [key, value] : overrides.items()) {
      if (value.is_object() && raw.contains(key) && raw[key].is_object()) {
        raw[key].update(value);
      } else {
        raw[key] = value;
      }
    }
    auto config = run_config_from_json(raw, fs::absolute(config_path).parent_path());
    Context ctx{config, make_run_dir(config, run_dir), out, err, env};
    if (curate->parsed()) return cmd_curate(ctx, curate_flags);
    if (gl->parsed()) return cmd_guidelines(ctx);
    if (infer->parsed()) return cmd_infer(ctx, infer_flags);
    return cmd_eval(ctx, eval_flags);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return kTransport;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace zsner::cli
