#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "support.hpp"
#include "zsner/corpus_io.hpp"
#include "zsner/errors.hpp"

using namespace zsner;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  support::TempDir dir;
  std::vector<AnnotatedDoc> docs;
  nlohmann::json config;
  std::ostringstream out;
  std::ostringstream err;
  std::istringstream in;
  cli::Environment env;
  std::function<std::unique_ptr<LlmClient>()> client_factory;

  explicit Workspace(std::size_t n_docs = 2) {
    support::CorpusSpec spec;
    spec.n_docs = n_docs;
    spec.tags = support::six_tags();
    save_corpus(spec.n_docs ? support::make_corpus(spec) : std::vector<AnnotatedDoc>{}, dir / "corpus.jsonl");
    docs = load_corpus(dir / "corpus.jsonl");
    config = {{"corpus", "corpus.jsonl"},
              {"output_dir", "out"},
              {"template_variant", "without_dg"},
              {"tags", support::six_tags()},
              {"endpoint", {{"model", "stub-model"}, {"api_key_env", "ZSNER_TEST_UNSET_KEY"}}},
              {"retry", {{"max_attempts", 1}}}};
    env.out = &out;
    env.err = &err;
    env.in = &in;
    env.sleeper = [](std::chrono::milliseconds) {};
  }

  void use(std::function<std::unique_ptr<LlmClient>()> factory) {
    client_factory = std::move(factory);
    env.make_client = [this](const EndpointConfig&) { return client_factory(); };
  }

  void use_echo() {
    auto plan = inference::build_call_plan(docs, support::six_tags(), {900, 0});
    auto table = support::echo_table(plan, docs, prompting::default_templates().without_dg, {});
    use([table] { return std::unique_ptr<LlmClient>(support::table_client(table)); });
  }

  int run(std::vector<std::string> args) {
    support::write_file(dir / "config.json", config.dump(2));
    args.insert(args.begin() + 1, {"--config", (dir / "config.json").string()});
    out.str("");
    err.str("");
    return cli::run(args, env);
  }

  fs::path run_dir(const std::string& name) const { return dir / name; }
};

std::string first_line(const fs::path& p) {
  auto s = support::read_file(p);
  return s.substr(0, s.find('\n'));
}

}  // namespace

TEST(Cli, InferPrintsThePlannedCallCount) {
  Workspace ws;
  ws.use_echo();
  EXPECT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("r1").string()}), cli::kOk) << ws.err.str();
  EXPECT_NE(ws.out.str().find("12 calls planned (2 docs, 2 chunks, 6 tags)"), std::string::npos) << ws.out.str();
  EXPECT_TRUE(fs::exists(ws.run_dir("r1") / "plan.jsonl"));
}

TEST(Cli, EchoStubScoresPerfectlyEndToEnd) {
  Workspace ws(20);
  ws.use_echo();
  ASSERT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("inf").string()}), cli::kOk) << ws.err.str();
  ASSERT_EQ(ws.run({"eval", "--run-dir", ws.run_dir("ev").string(), "--predictions",
                    ws.run_dir("inf").string()}),
            cli::kOk)
      << ws.err.str();
  EXPECT_NE(ws.out.str().find("| run | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 |"),
            std::string::npos)
      << ws.out.str();
  EXPECT_TRUE(fs::exists(ws.run_dir("ev") / "report.jsonl"));
  EXPECT_EQ(first_line(ws.run_dir("ev") / "report.txt").rfind("# zsner ", 0), 0u);
}

TEST(Cli, EmptyStubHasZeroRecall) {
  Workspace ws(20);
  ws.use([] {
    return std::unique_ptr<LlmClient>(
        std::make_unique<support::FunctionClient>([](const std::string&) { return std::string("[]"); }));
  });
  ASSERT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("inf").string()}), cli::kOk);
  ASSERT_EQ(ws.run({"eval", "--run-dir", ws.run_dir("ev").string(), "-p", ws.run_dir("inf").string(),
                    "--layout", "ood", "--benchmark", "Synthetic"}),
            cli::kOk);
  EXPECT_NE(ws.out.str().find("| Model | Synthetic | AVG |"), std::string::npos);
  EXPECT_NE(ws.out.str().find("| run | 0.0 | 0.0 |"), std::string::npos) << ws.out.str();
}

TEST(Cli, OutputsCarryMetadata) {
  Workspace ws;
  ws.config["rng_seed"] = 7;
  ws.use_echo();
  ASSERT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("r").string()}), cli::kOk);
  auto meta = nlohmann::json::parse(first_line(ws.run_dir("r") / "predictions.jsonl"))["_meta"];
  EXPECT_EQ(meta["kind"], "predictions");
  EXPECT_EQ(meta["seed"], 7);
  EXPECT_EQ(meta["config_hash"].get<std::string>().size(), 64u);
  EXPECT_EQ(meta["extra"]["template_variant"], "without_dg");
  EXPECT_EQ(meta["extra"]["n_calls"], 12);
}

TEST(Cli, BudgetNeedsConfirmation) {
  Workspace ws;
  ws.use_echo();
  EXPECT_EQ(ws.run({"infer", "--budget", "5", "--run-dir", ws.run_dir("a").string()}), cli::kConfig);
  EXPECT_NE(ws.err.str().find("--yes"), std::string::npos);
  EXPECT_FALSE(fs::exists(ws.run_dir("a") / "predictions.jsonl"));
  EXPECT_EQ(ws.run({"infer", "--budget", "5", "--yes", "--run-dir", ws.run_dir("b").string()}), cli::kOk);
  ws.env.interactive = true;
  ws.in.str("y\n");
  EXPECT_EQ(ws.run({"infer", "--budget", "5", "--run-dir", ws.run_dir("c").string()}), cli::kOk);
  EXPECT_NE(ws.out.str().find("Proceed?"), std::string::npos);
  ws.in.clear();
  ws.in.str("n\n");
  EXPECT_EQ(ws.run({"infer", "--budget", "5", "--run-dir", ws.run_dir("d").string()}), cli::kConfig);
}

TEST(Cli, MissingApiKeyNamesTheVariable) {
  Workspace ws;
  ::unsetenv("ZSNER_TEST_UNSET_KEY");
  EXPECT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("r").string()}), cli::kConfig);
  EXPECT_NE(ws.err.str().find("ZSNER_TEST_UNSET_KEY"), std::string::npos) << ws.err.str();
}

TEST(Cli, ConfigErrors) {
  Workspace ws;
  ws.config["api_key"] = "sk-secret";
  EXPECT_EQ(ws.run({"infer"}), cli::kConfig);
  ws.config.erase("api_key");
  ws.config["surprise"] = 1;
  EXPECT_EQ(ws.run({"infer"}), cli::kConfig);
  EXPECT_NE(ws.err.str().find("surprise"), std::string::npos);
  ws.config.erase("surprise");
  EXPECT_EQ(ws.run({"infer", "--window", "4", "--overlap", "4"}), cli::kConfig);
  EXPECT_EQ(ws.run({"infer", "--variant", "sideways"}), cli::kConfig);
  EXPECT_EQ(cli::run({"frobnicate"}, ws.env), cli::kConfig);
  EXPECT_EQ(cli::run({"--help"}, ws.env), cli::kOk);
}

TEST(Cli, WithDgRequiresGuidelinesForEveryTag) {
  Workspace ws;
  ws.config["template_variant"] = "with_dg";
  ws.use_echo();
  EXPECT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("r").string()}), cli::kConfig);
  EXPECT_NE(ws.err.str().find("no definition and guidelines for tags"), std::string::npos);
}

TEST(Cli, EmptyCorpusIsADataError) {
  Workspace ws(0);
  ws.use_echo();
  EXPECT_EQ(ws.run({"infer"}), cli::kData);
  EXPECT_NE(ws.err.str().find("is empty"), std::string::npos);
}

TEST(Cli, TransportFailuresExitWithFour) {
  Workspace ws;
  ws.use([] {
    return std::unique_ptr<LlmClient>(std::make_unique<support::FunctionClient>(
        [](const std::string&) -> std::string { throw TransportError("connection refused"); }));
  });
  EXPECT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("r").string()}), cli::kTransport);
  EXPECT_TRUE(fs::exists(ws.run_dir("r") / "predictions.jsonl"));
  ASSERT_EQ(ws.run({"eval", "--run-dir", ws.run_dir("e1").string(), "-p", ws.run_dir("r").string()}), cli::kOk);
  EXPECT_NE(ws.err.str().find("parse_status failed"), std::string::npos);
  EXPECT_EQ(ws.run({"eval", "--strict", "--run-dir", ws.run_dir("e2").string(), "-p", ws.run_dir("r").string()}),
            cli::kValidation);
}

TEST(Cli, GuidelinesAreCachedAcrossRuns) {
  Workspace ws(20);
  auto calls = std::make_shared<std::atomic<std::size_t>>(0);
  ws.use([calls] {
    return std::unique_ptr<LlmClient>(std::make_unique<support::FunctionClient>([calls](const std::string&) {
      ++*calls;
      return std::string(R"({"Definition": "a thing", "Guidelines": "label it"})");
    }));
  });
  auto tags = support::six_tags();
  tags.push_back("ghost");
  ws.config["tags"] = tags;
  ASSERT_EQ(ws.run({"guidelines", "--run-dir", ws.run_dir("g1").string()}), cli::kOk) << ws.err.str();
  EXPECT_EQ(calls->load(), 6u);
  EXPECT_NE(ws.out.str().find("6 tags with D&G, 1 skipped"), std::string::npos) << ws.out.str();
  auto skipped = support::read_file(ws.run_dir("g1") / "dg_skipped.jsonl");
  EXPECT_NE(skipped.find("\"ghost\""), std::string::npos);

  ASSERT_EQ(ws.run({"guidelines", "--run-dir", ws.run_dir("g2").string()}), cli::kOk);
  EXPECT_EQ(calls->load(), 6u);
  EXPECT_NE(ws.out.str().find("; 0 LLM calls"), std::string::npos);

  // The generated cache now feeds a with_dg inference run.
  ws.config["template_variant"] = "with_dg";
  ws.config["tags"] = support::six_tags();
  EXPECT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("i").string()}), cli::kOk) << ws.err.str();
}

TEST(Cli, EvalAggregatesRuns) {
  Workspace ws(20);
  ws.use_echo();
  ASSERT_EQ(ws.run({"infer", "--run-dir", ws.run_dir("a").string()}), cli::kOk);
  ws.use([] {
    return std::unique_ptr<LlmClient>(
        std::make_unique<support::FunctionClient>([](const std::string&) { return std::string("[]"); }));
  });
  ASSERT_EQ(ws.run({"infer", "--no-resume", "--run-dir", ws.run_dir("b").string()}), cli::kOk);
  ASSERT_EQ(ws.run({"eval", "--run-dir", ws.run_dir("e").string(), "--runs", ws.run_dir("a").string(),
                    ws.run_dir("b").string(), "--layout", "ood"}),
            cli::kOk)
      << ws.err.str();
  EXPECT_NE(ws.out.str().find("50.0 ± 50.0"), std::string::npos) << ws.out.str();
  EXPECT_TRUE(fs::exists(ws.run_dir("e") / "report-1.jsonl"));
  EXPECT_TRUE(fs::exists(ws.run_dir("e") / "report-2.jsonl"));
  EXPECT_TRUE(fs::exists(ws.run_dir("e") / "runs.jsonl"));
}

TEST(Cli, CurateWritesTrainingSetAndOverlap) {
  Workspace ws(40);
  nlohmann::json cur = {{"min_support", 3},
                        {"test_tags", {{"bench", {"person", "vessel"}}}},
                        {"keep_despite_overlap", {"person"}},
                        {"k_pos", 2},
                        {"k_neg", 2}};
  support::write_file(ws.dir / "curation.json", cur.dump());
  ws.config["curation_config"] = "curation.json";
  ASSERT_EQ(ws.run({"curate", "--run-dir", ws.run_dir("c").string()}), cli::kOk) << ws.err.str();
  EXPECT_NE(ws.out.str().find("5 of 6 tags eligible; 20 examples written"), std::string::npos) << ws.out.str();
  for (auto f : {"training_set.jsonl", "tags.jsonl", "overlap.jsonl", "overlap.txt"}) {
    EXPECT_TRUE(fs::exists(ws.run_dir("c") / f)) << f;
  }
  ASSERT_EQ(ws.run({"curate", "--run-dir", ws.run_dir("d").string()}), cli::kOk);
  EXPECT_EQ(support::read_file(ws.run_dir("c") / "training_set.jsonl"),
            support::read_file(ws.run_dir("d") / "training_set.jsonl"));
}

TEST(Cli, DefaultRunDirsAreDistinct) {
  Workspace ws;
  ws.use_echo();
  ASSERT_EQ(ws.run({"infer"}), cli::kOk);
  ASSERT_EQ(ws.run({"infer"}), cli::kOk);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(ws.dir / "out" / "runs")) n += e.is_directory() ? 1 : 0;
  EXPECT_EQ(n, 2u);
}
