#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "zsner/errors.hpp"
#include "zsner/inference.hpp"
#include "zsner/text.hpp"

using namespace zsner;
using namespace zsner::inference;

namespace {

// Set-builder form: windows start at multiples of the stride, and a window
// exists as long as the previous one did not already reach the last word.
std::vector<Window> enumerate_windows(std::size_t n, std::size_t w, std::size_t o) {
  if (n == 0) return {{0, 0}};
  std::vector<Window> out;
  const std::size_t stride = w - o;
  for (std::size_t k = 0;; ++k) {
    std::size_t s = k * stride;
    if (k > 0 && (k - 1) * stride + w >= n) break;
    out.push_back({s, std::min(s + w, n)});
  }
  return out;
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + ("w" + std::to_string(i));
  return s;
}

RunConfig quiet(prompting::TemplateVariant v = prompting::TemplateVariant::without_dg) {
  RunConfig rc;
  rc.variant = v;
  rc.concurrency = 3;
  rc.retry = {2, std::chrono::milliseconds(1), 1.0};
  rc.sleeper = [](std::chrono::milliseconds) {};
  return rc;
}

std::vector<AnnotatedDoc> docs(std::size_t n, std::size_t filler = 30, std::uint64_t seed = 1) {
  support::CorpusSpec spec;
  spec.n_docs = n;
  spec.tags = support::six_tags();
  spec.filler_words = filler;
  spec.seed = seed;
  return support::make_corpus(spec);
}

}  // namespace

TEST(PlanChunks, MatchesEnumerator) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = rng() % 60;
    std::size_t w = 1 + rng() % 15;
    std::size_t o = rng() % w;
    auto plan = plan_chunks("d", words(n), {w, o});
    EXPECT_EQ(plan.windows, enumerate_windows(n, w, o)) << n << " " << w << " " << o;
    EXPECT_EQ(plan.n_words, n);
  }
}

TEST(PlanChunks, CoversEveryWordWithExactOverlap) {
  auto plan = plan_chunks("d", words(23), {5, 2});
  std::vector<int> covered(23, 0);
  for (const auto& w : plan.windows) {
    for (auto i = w.begin; i < w.end; ++i) ++covered[i];
  }
  for (int c : covered) EXPECT_GE(c, 1);
  for (std::size_t i = 1; i < plan.windows.size(); ++i) {
    EXPECT_EQ(plan.windows[i - 1].end - plan.windows[i].begin, 2u);
  }
}

TEST(PlanChunks, ShortDocIsOneChunkAndValidation) {
  EXPECT_EQ(plan_chunks("d", words(10), {900, 0}).windows, (std::vector<Window>{{0, 10}}));
  EXPECT_EQ(plan_chunks("d", "", {900, 0}).windows, (std::vector<Window>{{0, 0}}));
  EXPECT_THROW(plan_chunks("d", "x", {0, 0}), ConfigError);
  EXPECT_THROW(plan_chunks("d", "x", {3, 3}), ConfigError);
}

TEST(ChunkText, VerbatimSlice) {
  std::string text = "  alpha\tbeta \n gamma  delta ";
  EXPECT_EQ(chunk_text(text, {1, 3}), "beta \n gamma");
  EXPECT_EQ(chunk_text(text, {0, 4}), "alpha\tbeta \n gamma  delta");
  EXPECT_EQ(chunk_text(text, {0, 0}), "");
}

TEST(CallPlan, MatchesTripleLoop) {
  auto d = docs(7, 40);
  std::vector<std::string> tags = {"vessel", "award", "person", "award"};
  ChunkConfig cfg{12, 3};
  auto plan = build_call_plan(d, tags, cfg);
  std::vector<std::string> sorted_tags = {"award", "person", "vessel"};
  std::vector<Job> expected;
  std::vector<const AnnotatedDoc*> by_id;
  for (const auto& x : d) by_id.push_back(&x);
  std::sort(by_id.begin(), by_id.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::size_t sum_chunks = 0;
  for (const auto* doc : by_id) {
    auto n = plan_chunks(*doc, cfg).windows.size();
    sum_chunks += n;
    for (std::size_t c = 0; c < n; ++c) {
      for (const auto& t : sorted_tags) expected.push_back({doc->id, c, t});
    }
  }
  EXPECT_EQ(plan.jobs, expected);
  EXPECT_EQ(plan.n_calls, sum_chunks * 3);
  EXPECT_EQ(plan.n_tags, 3u);
  EXPECT_THROW(build_call_plan(d, {}, cfg), ConfigError);
}

TEST(MergeChunks, IsTheUnion) {
  std::vector<SpanSet> parts = {{"a", "b"}, {}, {"b", "c"}};
  SpanSet expected;
  for (const auto& p : parts) {
    for (const auto& s : p) expected.insert(s);
  }
  EXPECT_EQ(merge_chunk_predictions(parts), expected);
  EXPECT_TRUE(merge_chunk_predictions({}).empty());
}

TEST(CallCacheTest, ContentAddressed) {
  support::TempDir dir;
  CallCache cache(dir.path());
  auto k1 = CallCache::key("m", "prompt");
  EXPECT_EQ(k1.size(), 64u);
  EXPECT_NE(k1, CallCache::key("m2", "prompt"));
  EXPECT_NE(k1, CallCache::key("m", "prompt2"));
  EXPECT_FALSE(cache.get(k1));
  EXPECT_TRUE(cache.put_if_absent(k1, "[\"x\"]"));
  EXPECT_FALSE(cache.put_if_absent(k1, "other"));
  EXPECT_EQ(*cache.get(k1), "[\"x\"]");
  CallCache reopened(dir.path());
  EXPECT_EQ(*reopened.get(k1), "[\"x\"]");
}

TEST(RunInference, EchoStubReproducesGold) {
  auto d = docs(10);
  auto tags = support::six_tags();
  auto plan = build_call_plan(d, tags, {900, 0});
  auto templates = prompting::default_templates();
  auto dg = support::simple_dg(tags);
  auto client = support::table_client(support::echo_table(plan, d, templates.with_dg, dg));
  auto preds = run_inference(plan, d, templates, dg, *client, quiet(prompting::TemplateVariant::with_dg));
  ASSERT_EQ(preds.size(), d.size() * tags.size());
  std::map<std::string, const AnnotatedDoc*> by_id;
  for (const auto& x : d) by_id[x.id] = &x;
  for (const auto& p : preds) {
    EXPECT_EQ(p.parse_status, ParseStatus::clean);
    const auto& gold = by_id[p.doc_id]->gold;
    auto it = gold.find(p.tag);
    SpanSet expected = it == gold.end() ? SpanSet{} : SpanSet(it->second.begin(), it->second.end());
    EXPECT_EQ(p.spans, expected) << p.doc_id << " " << p.tag;
  }
  EXPECT_EQ(client->calls(), plan.n_calls);
}

TEST(RunInference, EmptyAndGarbageStubs) {
  auto d = docs(3);
  auto plan = build_call_plan(d, {"person", "award"}, {900, 0});
  auto templates = prompting::default_templates();
  support::FunctionClient empty([](const std::string&) { return std::string("[]"); });
  for (const auto& p : run_inference(plan, d, templates, {}, empty, quiet())) {
    EXPECT_TRUE(p.spans.empty());
    EXPECT_EQ(p.parse_status, ParseStatus::clean);
  }
  support::FunctionClient garbage([](const std::string&) { return std::string("no clue"); });
  for (const auto& p : run_inference(plan, d, templates, {}, garbage, quiet())) {
    EXPECT_EQ(p.parse_status, ParseStatus::failed);
    EXPECT_EQ(p.raw_output, "no clue");
  }
}

TEST(RunInference, MultiChunkDocsMergeAndRecordEveryRaw) {
  std::vector<AnnotatedDoc> d = {{"d", "Ada met Bob and later Cy met Dee", {{"person", {"Ada", "Bob", "Cy", "Dee"}}}}};
  auto plan = build_call_plan(d, {"person"}, {4, 1});
  ASSERT_EQ(plan.chunks.at("d").windows.size(), 3u);
  auto templates = prompting::default_templates();
  auto client = support::table_client(support::echo_table(plan, d, templates.without_dg, {}));
  auto preds = run_inference(plan, d, templates, {}, *client, quiet());
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0].spans, (SpanSet{"Ada", "Bob", "Cy", "Dee"}));
  auto raws = nlohmann::json::parse(preds[0].raw_output);
  EXPECT_EQ(raws.size(), 3u);
}

TEST(RunInference, WorstChunkStatusWins) {
  std::vector<AnnotatedDoc> d = {{"d", "one two three four five six", {}}};
  auto plan = build_call_plan(d, {"t"}, {3, 0});
  auto templates = prompting::default_templates();
  support::FunctionClient mixed([](const std::string& p) {
    return p.find("one two three") != std::string::npos ? std::string("[\"one\"]") : std::string("```[\"five\"]```");
  });
  auto preds = run_inference(plan, d, templates, {}, mixed, quiet());
  EXPECT_EQ(preds[0].parse_status, ParseStatus::recovered);
  EXPECT_EQ(preds[0].spans, (SpanSet{"one", "five"}));
  support::FunctionClient half_broken([](const std::string& p) {
    return p.find("one two three") != std::string::npos ? std::string("[\"one\"]") : std::string("nope");
  });
  preds = run_inference(plan, d, templates, {}, half_broken, quiet());
  EXPECT_EQ(preds[0].parse_status, ParseStatus::failed);
  EXPECT_TRUE(preds[0].spans.empty());
}

TEST(RunInference, TransportFailuresAreRecordedNotCached) {
  support::TempDir dir;
  auto d = docs(2);
  auto plan = build_call_plan(d, {"person"}, {900, 0});
  auto templates = prompting::default_templates();
  auto rc = quiet();
  rc.cache_dir = dir.path();
  support::FunctionClient down([](const std::string&) -> std::string { throw TransportError("HTTP 502"); });
  RunStatistics stats;
  auto preds = run_inference(plan, d, templates, {}, down, rc, &stats);
  EXPECT_EQ(stats.failed, 2u);
  EXPECT_EQ(down.calls(), 4u);  // two attempts per job
  for (const auto& p : preds) {
    EXPECT_EQ(p.parse_status, ParseStatus::failed);
    EXPECT_NE(p.error.find("HTTP 502"), std::string::npos);
  }
  support::FunctionClient up([](const std::string&) { return std::string("[]"); });
  run_inference(plan, d, templates, {}, up, rc, &stats);
  EXPECT_EQ(stats.sent, 2u);
  EXPECT_EQ(stats.cache_hits, 0u);
}

TEST(RunInference, ResumeAfterAbortIsIdentical) {
  auto d = docs(12);
  auto tags = support::six_tags();
  auto plan = build_call_plan(d, tags, {900, 0});
  auto templates = prompting::default_templates();
  auto table = support::echo_table(plan, d, templates.without_dg, {});

  support::TempDir fresh_dir;
  auto rc = quiet();
  rc.cache_dir = fresh_dir.path();
  auto reference_client = support::table_client(table);
  auto reference = run_inference(plan, d, templates, {}, *reference_client, rc);

  support::TempDir dir;
  rc.cache_dir = dir.path();
  std::atomic<int> budget{25};
  support::FunctionClient dying([&](const std::string& p) -> std::string {
    if (--budget < 0) throw std::runtime_error("killed");
    return table.at(p);
  });
  EXPECT_THROW(run_inference(plan, d, templates, {}, dying, rc), std::runtime_error);

  RunStatistics stats;
  auto resumed_client = support::table_client(table);
  auto resumed = run_inference(plan, d, templates, {}, *resumed_client, rc, &stats);
  EXPECT_EQ(resumed, reference);
  EXPECT_GE(stats.cache_hits, 20u);
  EXPECT_EQ(stats.cache_hits + stats.sent, plan.n_calls);
  EXPECT_EQ(resumed_client->calls(), stats.sent);
}

TEST(RunInference, NoResumeIgnoresTheCache) {
  support::TempDir dir;
  auto d = docs(2);
  auto plan = build_call_plan(d, {"person"}, {900, 0});
  auto templates = prompting::default_templates();
  auto rc = quiet();
  rc.cache_dir = dir.path();
  support::FunctionClient client([](const std::string&) { return std::string("[]"); });
  run_inference(plan, d, templates, {}, client, rc);
  rc.resume = false;
  run_inference(plan, d, templates, {}, client, rc);
  EXPECT_EQ(client.calls(), 4u);
}

TEST(RunInference, ConcurrencyDoesNotChangeOutput) {
  auto d = docs(8);
  auto plan = build_call_plan(d, support::six_tags(), {10, 2});
  auto templates = prompting::default_templates();
  auto table = support::echo_table(plan, d, templates.without_dg, {});
  auto rc = quiet();
  rc.concurrency = 1;
  auto c1 = support::table_client(table);
  auto one = run_inference(plan, d, templates, {}, *c1, rc);
  rc.concurrency = 8;
  auto c8 = support::table_client(table);
  EXPECT_EQ(run_inference(plan, d, templates, {}, *c8, rc), one);
}

TEST(RunInference, MissingGuidelinesFailBeforeAnyCall) {
  auto d = docs(2);
  auto plan = build_call_plan(d, {"person", "vessel", "award"}, {900, 0});
  auto dg = support::simple_dg({"person"});
  support::FunctionClient client([](const std::string&) { return std::string("[]"); });
  try {
    run_inference(plan, d, prompting::default_templates(), dg, client, quiet(prompting::TemplateVariant::with_dg));
    FAIL();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("award"), std::string::npos);
    EXPECT_NE(msg.find("vessel"), std::string::npos);
  }
  EXPECT_EQ(client.calls(), 0u);
  EXPECT_EQ(missing_guidelines(plan, dg), (std::vector<std::string>{"award", "vessel"}));
}

TEST(RunInference, DatasetScopedGuidelinesAreUsed) {
  std::vector<AnnotatedDoc> d = {{"d", "Ada", {}}};
  auto plan = build_call_plan(d, {"person"}, {900, 0});
  guidelines::DgCache dg;
  dg.insert_if_absent({{"person", "generic person", "g", DgOrigin::handwritten, ""}, std::nullopt});
  dg.insert_if_absent({{"person", "not a politician", "g", DgOrigin::handwritten, "politics"}, std::nullopt});
  std::string seen;
  support::FunctionClient client([&](const std::string& p) {
    seen = p;
    return std::string("[]");
  });
  auto rc = quiet(prompting::TemplateVariant::with_dg);
  rc.dataset = "politics";
  run_inference(plan, d, prompting::default_templates(), dg, client, rc);
  EXPECT_NE(seen.find("DEFINITION: not a politician"), std::string::npos);
}
