#include <benchmark/benchmark.h>

#include "zsner/prompting.hpp"

namespace {

void BM_RenderTaskPrompt(benchmark::State& state) {
  auto templates = zsner::prompting::default_templates();
  std::string chunk;
  for (int i = 0; i < state.range(0); ++i) chunk += "word" + std::to_string(i) + ' ';
  zsner::DefGuidelines dg{"person", "A human being referred to by name.",
                          "Label full names; skip pronouns and titles.", zsner::DgOrigin::handwritten, ""};
  for (auto _ : state) {
    benchmark::DoNotOptimize(zsner::prompting::render_task_prompt(templates.with_dg, chunk, "person", &dg, "d", 0));
  }
}
BENCHMARK(BM_RenderTaskPrompt)->Arg(100)->Arg(900);

void BM_RenderTarget(benchmark::State& state) {
  std::vector<std::string> gold;
  for (int i = 0; i < state.range(0); ++i) gold.push_back("Entity \"" + std::to_string(i) + "\"");
  for (auto _ : state) benchmark::DoNotOptimize(zsner::prompting::render_target(gold));
}
BENCHMARK(BM_RenderTarget)->Arg(1)->Arg(64);

}  // namespace
