#include "support.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>

namespace zsner::support {

namespace fs = std::filesystem;

fs::path fixture_path(const std::string& name) { return fs::path(ZSNER_FIXTURE_DIR) / name; }

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "zsner-test-XXXXXX").string();
  if (mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << content;
}

FunctionClient::FunctionClient(std::function<std::string(const std::string&)> fn, std::string model)
    : fn_(std::move(fn)), model_(std::move(model)) {}

std::string FunctionClient::complete(const ChatRequest& request) {
  ++calls_;
  return fn_(request.messages.back().content);
}

std::map<std::string, std::string> echo_table(const inference::CallPlan& plan,
                                              const std::vector<AnnotatedDoc>& docs,
                                              const prompting::PromptTemplate& tmpl,
                                              const guidelines::DgCache& dg, const std::string& dataset) {
  std::map<std::string, const AnnotatedDoc*> by_id;
  for (const auto& d : docs) by_id[d.id] = &d;
  std::map<std::string, std::string> table;
  for (const auto& job : plan.jobs) {
    const auto& doc = *by_id.at(job.doc_id);
    auto chunk = inference::chunk_text(doc.text, plan.chunks.at(job.doc_id).windows.at(job.chunk_index));
    std::optional<DefGuidelines> entry;
    if (tmpl.variant == prompting::TemplateVariant::with_dg) entry = dg.lookup(job.tag, dataset)->dg;
    auto prompt = prompting::render_task_prompt(tmpl, chunk, job.tag, entry ? &*entry : nullptr, job.doc_id,
                                                job.chunk_index);
    std::vector<std::string> spans;
    if (auto it = doc.gold.find(job.tag); it != doc.gold.end()) {
      for (const auto& s : it->second) {
        if (chunk.find(s) != std::string_view::npos) spans.push_back(s);
      }
    }
    table[prompt.text] = prompting::render_target(spans);
  }
  return table;
}

std::unique_ptr<FunctionClient> table_client(std::map<std::string, std::string> table) {
  auto shared = std::make_shared<const std::map<std::string, std::string>>(std::move(table));
  return std::make_unique<FunctionClient>([shared](const std::string& prompt) -> std::string {
    auto it = shared->find(prompt);
    return it == shared->end() ? "[]" : it->second;
  });
}

namespace {

const std::vector<std::string> kFiller = {
    "the",   "river", "of",    "and",  "blue",   "lamp",  "quietly", "north", "market", "over",
    "under", "glass", "seven", "with", "garden", "train", "pebble",  "old",   "window", "early"};

std::string entity_name(const std::string& tag, std::size_t k) {
  std::string stem;
  bool upper = true;
  for (char c : tag) {
    if (c == ' ') {
      stem += '_';
      upper = true;
      continue;
    }
    stem += upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
    upper = false;
  }
  char num[8];
  std::snprintf(num, sizeof num, "%02zu", k);
  return stem + "-" + num + (k % 2 == 1 ? " Group" : "");
}

}  // namespace

std::vector<AnnotatedDoc> make_corpus(const CorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<AnnotatedDoc> docs;
  for (std::size_t i = 0; i < spec.n_docs; ++i) {
    AnnotatedDoc doc;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04zu", spec.id_prefix.c_str(), i);
    doc.id = id;
    std::vector<std::string> pieces;
    for (std::size_t w = 0; w < spec.filler_words; ++w) pieces.push_back(kFiller[uniform(kFiller.size())]);
    for (const auto& tag : spec.tags) {
      if (std::bernoulli_distribution(spec.p_mention)(rng) == false) continue;
      std::size_t n = 1 + uniform(3);
      std::set<std::size_t> picks;
      while (picks.size() < n) picks.insert(uniform(12));
      for (auto k : picks) {
        auto name = entity_name(tag, k);
        doc.gold[tag].push_back(name);
        pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(uniform(pieces.size() + 1)), name);
      }
    }
    for (std::size_t p = 0; p < pieces.size(); ++p) doc.text += (p ? " " : "") + pieces[p];
    normalize_gold(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<std::string> six_tags() {
  return {"person", "location", "organization", "vessel", "programming language", "award"};
}

guidelines::DgCache simple_dg(const std::vector<std::string>& tags) {
  guidelines::DgCache cache;
  for (const auto& tag : tags) {
    DefGuidelines dg;
    dg.tag = tag;
    dg.definition = "'" + tag + "' refers to names of " + tag + " entities.";
    dg.guidelines = "Label only explicit mentions of a " + tag + ".";
    dg.origin = DgOrigin::handwritten;
    cache.insert_if_absent({dg, std::nullopt});
  }
  return cache;
}

struct StubServer::Impl {
  httplib::Server server;
};

StubServer::StubServer(Handler handler) : impl_(std::make_unique<Impl>()), handler_(std::move(handler)) {
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages")) {
      res.status = 400;
      return;
    }
    std::size_t n = ++requests_;
    if (n > hang_after_.load()) {
      while (!stopping_.load() && n > hang_after_.load()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
      res.status = 503;
      return;
    }
    std::string prompt = body["messages"].back()["content"].get<std::string>();
    nlohmann::json reply = {
        {"id", "stub"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", handler_(prompt)}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() { stop(); }

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

void StubServer::stop() {
  stopping_.store(true);
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace zsner::support
