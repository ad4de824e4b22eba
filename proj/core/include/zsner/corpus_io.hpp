#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/model.hpp"

namespace zsner {

/// Provenance line written at the top of every tool output file.
///
/// Serialized as a single `{"_meta": {...}}` record; every loader in this
/// library skips such lines.
struct FileMetadata {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
};

/// Library version string embedded into FileMetadata by the CLI.
std::string_view tool_version();

/// Reads a line-delimited JSON file, skipping blank lines and `_meta` records.
/// `fn` receives each parsed record and its 1-based line number. Malformed JSON
/// raises DataError naming the line.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&, std::size_t)>& fn);

/// Writes records one per line (compact form), optionally preceded by a
/// metadata line. Throws DataError when the file cannot be written.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& records,
                 const std::optional<FileMetadata>& meta = std::nullopt);

nlohmann::ordered_json to_json(const AnnotatedDoc& doc);
AnnotatedDoc annotated_doc_from_json(const nlohmann::json& record);

nlohmann::ordered_json to_json(const Prediction& pred);
Prediction prediction_from_json(const nlohmann::json& record);

nlohmann::ordered_json to_json(const DefGuidelines& dg);
DefGuidelines def_guidelines_from_json(const nlohmann::json& record);

/// Loads a corpus file. Gold lists are reordered by first occurrence and
/// deduplicated; a span missing from its text or a duplicate doc id is an error.
std::vector<AnnotatedDoc> load_corpus(const std::filesystem::path& path);

void save_corpus(const std::vector<AnnotatedDoc>& docs, const std::filesystem::path& path,
                 const std::optional<FileMetadata>& meta = std::nullopt);

void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path,
                      const std::optional<FileMetadata>& meta = std::nullopt);

std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace zsner
