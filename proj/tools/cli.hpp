#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/evaluation.hpp"
#include "zsner/inference.hpp"
#include "zsner/llm_client.hpp"
#include "zsner/prompting.hpp"

namespace zsner::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kTransport = 4,
  kValidation = 5,
};

/// Everything a command reads from `--config`. Relative paths are resolved
/// against the directory of the config file.
struct RunConfig {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> dg_file;
  std::optional<std::filesystem::path> template_dir;
  std::optional<std::filesystem::path> curation_config;
  std::filesystem::path output_dir = "runs";
  EndpointConfig endpoint;
  inference::ChunkConfig chunking;
  prompting::TemplateVariant variant = prompting::TemplateVariant::with_dg;
  evaluation::MatchPolicy match_policy;
  std::uint64_t rng_seed = 0;
  std::size_t concurrency = 4;
  std::size_t call_budget = 10000;
  bool resume = true;
  std::string dataset;
  std::vector<std::string> tags;  // empty: every tag annotated in the corpus
  evaluation::ReportLayout layout = evaluation::ReportLayout::buster_table;
  std::string label = "run";
  std::string benchmark = "F1";
  RetryPolicy retry;

  nlohmann::json raw;  // effective config, flag overrides applied
  std::string hash;    // sha256 of the canonical dump of `raw`
};

/// Parses `raw` (already carrying any flag overrides). Throws ConfigError.
RunConfig run_config_from_json(const nlohmann::json& raw, const std::filesystem::path& base_dir);
nlohmann::json read_config_file(const std::filesystem::path& path);

struct Environment {
  std::ostream* out = nullptr;  // defaults to std::cout
  std::ostream* err = nullptr;  // defaults to std::cerr
  std::istream* in = nullptr;   // defaults to std::cin
  bool interactive = false;
  std::function<std::unique_ptr<LlmClient>(const EndpointConfig&)> make_client;  // HTTP when empty
  Sleeper sleeper;  // real sleeping when empty
};

/// Runs one invocation, `args` excluding the program name. Errors are reported
/// on `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, const Environment& env = {});

}  // namespace zsner::cli
