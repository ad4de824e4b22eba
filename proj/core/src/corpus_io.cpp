#include "zsner/corpus_io.hpp"

#include <fstream>
#include <set>
#include <system_error>

#include <fmt/format.h>

#include "zsner/errors.hpp"

namespace zsner {

namespace {

constexpr std::string_view kVersion = "0.3.0";

const nlohmann::json& require(const nlohmann::json& record, const char* field,
                              nlohmann::json::value_t type) {
  auto it = record.find(field);
  if (it == record.end()) throw DataError(fmt::format("missing field '{}'", field));
  bool ok = it->type() == type ||
            (type == nlohmann::json::value_t::number_unsigned && it->is_number_integer());
  if (!ok) throw DataError(fmt::format("field '{}' has the wrong type", field));
  return *it;
}

std::string require_string(const nlohmann::json& record, const char* field) {
  return require(record, field, nlohmann::json::value_t::string).get<std::string>();
}

}  // namespace

std::string_view tool_version() { return kVersion; }

nlohmann::ordered_json FileMetadata::to_json() const {
  nlohmann::ordered_json meta;
  meta["kind"] = kind;
  meta["config_hash"] = config_hash;
  meta["seed"] = seed;
  meta["tool_version"] = tool_version;
  if (!extra.empty()) meta["extra"] = extra;
  return nlohmann::ordered_json{{"_meta", meta}};
}

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
    }
    if (!record.is_object()) {
      throw DataError(fmt::format("{}:{}: record is not an object", path.string(), line_no));
    }
    if (record.contains("_meta")) continue;
    try {
      fn(record, line_no);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::ordered_json>& records,
                 const std::optional<FileMetadata>& meta) {
  auto dump = [](const nlohmann::ordered_json& j) {
    return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
  };
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    if (meta) out << dump(meta->to_json()) << '\n';
    for (const auto& r : records) out << dump(r) << '\n';
    out.flush();
    if (!out) throw DataError(fmt::format("write to '{}' failed", path.string()));
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError(fmt::format("cannot move output into '{}': {}", path.string(), ec.message()));
}

nlohmann::ordered_json to_json(const AnnotatedDoc& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  nlohmann::ordered_json gold = nlohmann::ordered_json::object();
  for (const auto& [tag, spans] : doc.gold) gold[tag] = spans;
  j["gold"] = std::move(gold);
  return j;
}

AnnotatedDoc annotated_doc_from_json(const nlohmann::json& record) {
  AnnotatedDoc doc;
  doc.id = require_string(record, "id");
  doc.text = require_string(record, "text");
  const auto& gold = require(record, "gold", nlohmann::json::value_t::object);
  for (const auto& [tag, spans] : gold.items()) {
    if (!spans.is_array()) throw DataError(fmt::format("gold['{}'] is not a list", tag));
    auto& list = doc.gold[tag];
    for (const auto& s : spans) {
      if (!s.is_string()) throw DataError(fmt::format("gold['{}'] holds a non-string span", tag));
      list.push_back(s.get<std::string>());
    }
  }
  return doc;
}

nlohmann::ordered_json to_json(const Prediction& pred) {
  nlohmann::ordered_json j;
  j["doc_id"] = pred.doc_id;
  j["tag"] = pred.tag;
  j["spans"] = pred.spans;
  j["raw_output"] = pred.raw_output;
  j["parse_status"] = std::string(to_string(pred.parse_status));
  if (!pred.error.empty()) j["error"] = pred.error;
  return j;
}

Prediction prediction_from_json(const nlohmann::json& record) {
  Prediction p;
  p.doc_id = require_string(record, "doc_id");
  p.tag = require_string(record, "tag");
  for (const auto& s : require(record, "spans", nlohmann::json::value_t::array)) {
    if (!s.is_string()) throw DataError("spans holds a non-string element");
    p.spans.insert(s.get<std::string>());
  }
  p.raw_output = require_string(record, "raw_output");
  p.parse_status = parse_status_from_string(require_string(record, "parse_status"));
  if (auto it = record.find("error"); it != record.end() && it->is_string()) {
    p.error = it->get<std::string>();
  }
  p.validate();
  return p;
}

nlohmann::ordered_json to_json(const DefGuidelines& dg) {
  nlohmann::ordered_json j;
  j["tag"] = dg.tag;
  if (!dg.dataset.empty()) j["dataset"] = dg.dataset;
  j["definition"] = dg.definition;
  j["guidelines"] = dg.guidelines;
  j["origin"] = std::string(to_string(dg.origin));
  return j;
}

DefGuidelines def_guidelines_from_json(const nlohmann::json& record) {
  DefGuidelines dg;
  dg.tag = require_string(record, "tag");
  dg.definition = require_string(record, "definition");
  dg.guidelines = require_string(record, "guidelines");
  dg.origin = dg_origin_from_string(require_string(record, "origin"));
  if (auto it = record.find("dataset"); it != record.end()) {
    if (!it->is_string()) throw DataError("field 'dataset' has the wrong type");
    dg.dataset = it->get<std::string>();
  }
  dg.validate();
  return dg;
}

std::vector<AnnotatedDoc> load_corpus(const std::filesystem::path& path) {
  std::vector<AnnotatedDoc> docs;
  std::set<std::string> ids;
  read_jsonl(path, [&](const nlohmann::json& record, std::size_t) {
    auto doc = annotated_doc_from_json(record);
    if (!ids.insert(doc.id).second) {
      throw DataError(fmt::format("duplicate document id '{}'", doc.id));
    }
    normalize_gold(doc);
    docs.push_back(std::move(doc));
  });
  return docs;
}

void save_corpus(const std::vector<AnnotatedDoc>& docs, const std::filesystem::path& path,
                 const std::optional<FileMetadata>& meta) {
  std::vector<nlohmann::ordered_json> records;
  records.reserve(docs.size());
  for (const auto& d : docs) records.push_back(to_json(d));
  write_jsonl(path, records, meta);
}

void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path,
                      const std::optional<FileMetadata>& meta) {
  std::vector<nlohmann::ordered_json> records;
  records.reserve(preds.size());
  for (const auto& p : preds) records.push_back(to_json(p));
  write_jsonl(path, records, meta);
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> preds;
  read_jsonl(path, [&](const nlohmann::json& record, std::size_t) {
    preds.push_back(prediction_from_json(record));
  });
  return preds;
}

}  // namespace zsner
