#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "zsner/output_parser.hpp"
#include "zsner/prompting.hpp"

namespace {

std::vector<std::string> spans(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("Entity \"" + std::to_string(i) + "\" of Somewhere");
  return out;
}

void BM_ParseClean(benchmark::State& state) {
  auto raw = zsner::prompting::render_target(spans(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(zsner::parse_model_output(raw));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(raw.size()));
}
BENCHMARK(BM_ParseClean)->Arg(1)->Arg(16)->Arg(256);

void BM_ParseProseWrapped(benchmark::State& state) {
  std::string raw = "Sure! Here are the entities I found in the text:\n```json\n" +
                    zsner::prompting::render_target(spans(state.range(0))) +
                    "\n```\nLet me know if you need anything else.";
  for (auto _ : state) benchmark::DoNotOptimize(zsner::parse_model_output(raw));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(raw.size()));
}
BENCHMARK(BM_ParseProseWrapped)->Arg(1)->Arg(16)->Arg(256);

void BM_ParseGarbage(benchmark::State& state) {
  std::string raw(static_cast<std::size_t>(state.range(0)), 'x');
  for (std::size_t i = 0; i < raw.size(); i += 7) raw[i] = "[{\"]},'"[i % 7];
  for (auto _ : state) benchmark::DoNotOptimize(zsner::parse_model_output(raw));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseGarbage)->Arg(256)->Arg(4096);

}  // namespace
