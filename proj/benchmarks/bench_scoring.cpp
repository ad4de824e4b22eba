#include <benchmark/benchmark.h>

#include <random>

#include "zsner/evaluation.hpp"

namespace {

zsner::SpanSet random_set(std::mt19937_64& rng, std::size_t n) {
  zsner::SpanSet s;
  for (std::size_t i = 0; i < n; ++i) s.insert("span " + std::to_string(rng() % (2 * n + 1)));
  return s;
}

void BM_ScorePair(benchmark::State& state) {
  std::mt19937_64 rng(1);
  auto gold = random_set(rng, state.range(0));
  auto pred = random_set(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(zsner::evaluation::score_pair(gold, pred));
}
BENCHMARK(BM_ScorePair)->Arg(4)->Arg(64);

void BM_Evaluate(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const std::size_t n_docs = state.range(0);
  std::vector<std::string> tags = {"person", "location", "organization", "award", "vessel", "product"};
  std::vector<zsner::AnnotatedDoc> gold;
  std::vector<zsner::Prediction> preds;
  for (std::size_t d = 0; d < n_docs; ++d) {
    zsner::AnnotatedDoc doc{"doc-" + std::to_string(d), "", {}};
    for (const auto& t : tags) {
      auto g = random_set(rng, 3);
      doc.gold[t] = {g.begin(), g.end()};
      preds.push_back({doc.id, t, random_set(rng, 3), "", zsner::ParseStatus::clean, ""});
    }
    gold.push_back(std::move(doc));
  }
  for (auto _ : state) benchmark::DoNotOptimize(zsner::evaluation::evaluate(gold, preds));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(preds.size()));
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(1000);

}  // namespace
