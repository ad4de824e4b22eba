#include <benchmark/benchmark.h>

#include <string>

#include "zsner/inference.hpp"

namespace {

std::string document(std::size_t words) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += (i % 13 == 0 ? "\n" : " ") + std::string("token") + std::to_string(i);
  return s;
}

void BM_PlanChunks(benchmark::State& state) {
  auto text = document(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(zsner::inference::plan_chunks("d", text, {900, 100}));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_PlanChunks)->Arg(500)->Arg(20000);

void BM_BuildCallPlan(benchmark::State& state) {
  std::vector<zsner::AnnotatedDoc> docs;
  for (int i = 0; i < state.range(0); ++i) docs.push_back({"doc-" + std::to_string(i), document(2000), {}});
  std::vector<std::string> tags = {"person", "location", "organization", "award", "vessel", "product"};
  for (auto _ : state) benchmark::DoNotOptimize(zsner::inference::build_call_plan(docs, tags, {900, 100}));
}
BENCHMARK(BM_BuildCallPlan)->Arg(10)->Arg(100);

}  // namespace
