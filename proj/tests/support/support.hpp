#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "zsner/guidelines.hpp"
#include "zsner/inference.hpp"
#include "zsner/llm_client.hpp"
#include "zsner/model.hpp"
#include "zsner/prompting.hpp"

namespace zsner::support {

std::filesystem::path fixture_path(const std::string& name);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Answers each prompt through `fn`; counts calls.
class FunctionClient : public LlmClient {
 public:
  explicit FunctionClient(std::function<std::string(const std::string&)> fn, std::string model = "stub-model");
  std::string complete(const ChatRequest& request) override;
  std::string model_id() const override { return model_; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::function<std::string(const std::string&)> fn_;
  std::string model_;
  std::atomic<std::size_t> calls_{0};
};

/// Maps every prompt the plan will send to render_target of the gold spans
/// that occur in the prompt's chunk.
std::map<std::string, std::string> echo_table(const inference::CallPlan& plan,
                                              const std::vector<AnnotatedDoc>& docs,
                                              const prompting::PromptTemplate& tmpl,
                                              const guidelines::DgCache& dg, const std::string& dataset = {});

/// A client answering from `table`; prompts not in the table get "[]".
std::unique_ptr<FunctionClient> table_client(std::map<std::string, std::string> table);

/// Synthetic annotated documents. Each tag owns a disjoint entity lexicon; a
/// document mentions each tag with probability `p_mention`, up to 3 spans.
struct CorpusSpec {
  std::size_t n_docs = 20;
  std::vector<std::string> tags;
  std::size_t filler_words = 30;
  double p_mention = 0.6;
  std::uint64_t seed = 1;
  std::string id_prefix = "doc";
};
std::vector<AnnotatedDoc> make_corpus(const CorpusSpec& spec);

/// Six plain tags used across end-to-end tests.
std::vector<std::string> six_tags();

/// Handwritten D&G for every tag, good enough for prompt rendering.
guidelines::DgCache simple_dg(const std::vector<std::string>& tags);

/// A local chat-completions server on 127.0.0.1 and a free port.
class StubServer {
 public:
  using Handler = std::function<std::string(const std::string& prompt)>;
  explicit StubServer(Handler handler);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string base_url() const;
  std::size_t requests() const { return requests_.load(); }
  /// After `n` requests, later ones block until stop() or until the limit is
  /// raised again, then fail with 503.
  void hang_after(std::size_t n) { hang_after_.store(n); }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Handler handler_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> hang_after_{SIZE_MAX};
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

}  // namespace zsner::support
