#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsner/model.hpp"

namespace zsner::prompting {

enum class TemplateVariant { with_dg, without_dg };

std::string_view to_string(TemplateVariant v);
TemplateVariant template_variant_from_string(std::string_view text);

/// Instruction template with `{name}` placeholders; `{{` and `}}` are literal
/// braces.
struct PromptTemplate {
  std::string name;
  std::string body;
  TemplateVariant variant = TemplateVariant::with_dg;

  /// Checks placeholder multiplicities for the variant and rejects unknown
  /// placeholders. Throws ConfigError.
  void validate() const;
};

/// Placeholder names in order of appearance (with repeats).
std::vector<std::string> placeholders(std::string_view body);

/// Substitutes every placeholder from `values`. Unknown or unbalanced
/// placeholders raise ConfigError.
std::string substitute(std::string_view body, const std::map<std::string, std::string>& values);

struct RenderedPrompt {
  std::string text;
  std::string tag;
  std::string doc_id;
  std::size_t chunk_index = 0;
};

/// Renders the per-tag extraction prompt for one document chunk. `dg` must be
/// present for with_dg templates and absent for without_dg (ConfigError).
RenderedPrompt render_task_prompt(const PromptTemplate& tmpl, std::string_view chunk_text,
                                  const std::string& tag, const DefGuidelines* dg,
                                  const std::string& doc_id = {}, std::size_t chunk_index = 0);

/// JSON array literal of the spans in the given order.
std::string render_target(const std::vector<std::string>& gold_spans);

/// Three positive example texts for a tag, chosen under `rng_seed`. Throws
/// DataError listing the tag when fewer than three positives exist.
std::vector<std::string> sample_guideline_examples(const std::vector<AnnotatedDoc>& corpus,
                                                   const std::string& tag,
                                                   std::uint64_t rng_seed);

/// Guideline-generation prompt. The template carries the exemplar round and
/// uses `{tag}` and `{examples}`; `examples` must hold exactly three entries.
std::string render_guideline_prompt(std::string_view guideline_template, const std::string& tag,
                                    const std::vector<std::string>& examples);

/// The set of templates a run needs.
struct TemplateSet {
  PromptTemplate with_dg;
  PromptTemplate without_dg;
  std::string guideline_generation;

  const PromptTemplate& task(TemplateVariant v) const {
    return v == TemplateVariant::with_dg ? with_dg : without_dg;
  }
};

/// Built-in default texts.
TemplateSet default_templates();

/// Loads `task_with_dg.tmpl`, `task_without_dg.tmpl` and
/// `dg_generation.tmpl` from `dir`; missing files fall back to the defaults.
TemplateSet load_templates(const std::filesystem::path& dir);

}  // namespace zsner::prompting
