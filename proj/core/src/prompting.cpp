#include "zsner/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "zsner/errors.hpp"
#include "zsner/random.hpp"

namespace zsner::prompting {

namespace {

constexpr std::string_view kTaskPreamble =
    "You are given a text chunk (delimited by triple quotes) and an instruction.\n"
    "Read the text and answer to the instruction in the end.\n"
    "\"\"\"\n"
    "{input_text}\n"
    "\"\"\"\n"
    "Instruction: Extract the Named Entities of type '{tag}' from the text chunk you have read.\n";

constexpr std::string_view kDgBlock =
    "You are given a DEFINITION and some GUIDELINES.\n"
    "DEFINITION: {definition}\n"
    "GUIDELINES: {guidelines}\n";

constexpr std::string_view kTaskOutput =
    "Return a JSON list of instances of this Named Entity type. "
    "Return an empty list if no instances are present.\n";

constexpr std::string_view kGuidelineTemplate =
    "Given a Named Entity type and some example sentences in which it occurs, write a concise\n"
    "DEFINITION of the Named Entity and GUIDELINES with annotation directives: what to label,\n"
    "what not to label, and edge cases where the annotator should be cautious.\n"
    "Answer with a JSON object of the form {{\"Definition\": \"...\", \"Guidelines\": \"...\"}}.\n"
    "\n"
    "### Example\n"
    "USER:\n"
    "Named Entity: 'programming language'\n"
    "Sentences:\n"
    "1. The backend was rewritten from PHP to Go in 2019.\n"
    "2. Students learn Python before moving on to C++.\n"
    "3. The Java ecosystem still dominates enterprise software.\n"
    "ASSISTANT:\n"
    "{{\"Definition\": \"'programming language' refers to formal languages used to write computer "
    "software, such as Python, Go or Java.\", \"Guidelines\": \"Label the language name only, not "
    "frameworks, libraries or tools built on it. Exercise caution with ambiguous names like 'Java' "
    "(an island, a coffee) or 'Go' (a verb, a board game) and rely on the context.\"}}\n"
    "\n"
    "### Task\n"
    "USER:\n"
    "Named Entity: '{tag}'\n"
    "Sentences:\n"
    "{examples}\n"
    "ASSISTANT:\n";

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Walks the template; calls on_text for literal runs and on_name for
// placeholders.
template <typename OnText, typename OnName>
void walk(std::string_view body, OnText on_text, OnName on_name) {
  std::size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        on_text(std::string_view("{"));
        i += 2;
        continue;
      }
      std::size_t close = body.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw ConfigError(fmt::format("unbalanced '{{' at offset {} in template", i));
      }
      auto name = body.substr(i + 1, close - i - 1);
      if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
        throw ConfigError(fmt::format("malformed placeholder '{{{}}}' in template", name));
      }
      on_name(name);
      i = close + 1;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        on_text(std::string_view("}"));
        i += 2;
        continue;
      }
      throw ConfigError(fmt::format("unbalanced '}}' at offset {} in template", i));
    } else {
      std::size_t next = body.find_first_of("{}", i);
      if (next == std::string_view::npos) next = body.size();
      on_text(body.substr(i, next - i));
      i = next;
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read template '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(TemplateVariant v) {
  return v == TemplateVariant::with_dg ? "with_dg" : "without_dg";
}

TemplateVariant template_variant_from_string(std::string_view text) {
  if (text == "with_dg") return TemplateVariant::with_dg;
  if (text == "without_dg") return TemplateVariant::without_dg;
  throw ConfigError(fmt::format("unknown template variant '{}'", text));
}

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> names;
  walk(body, [](std::string_view) {}, [&](std::string_view n) { names.emplace_back(n); });
  return names;
}

std::string substitute(std::string_view body, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size());
  walk(
      body, [&](std::string_view t) { out.append(t); },
      [&](std::string_view name) {
        auto it = values.find(std::string(name));
        if (it == values.end()) {
          throw ConfigError(fmt::format("unknown placeholder '{{{}}}' in template", name));
        }
        out.append(it->second);
      });
  return out;
}

void PromptTemplate::validate() const {
  auto names = placeholders(body);
  auto count = [&](std::string_view n) { return std::count(names.begin(), names.end(), n); };
  static const std::set<std::string> kKnown{"input_text", "tag", "definition", "guidelines"};
  for (const auto& n : names) {
    if (kKnown.count(n) == 0) {
      throw ConfigError(fmt::format("template '{}': unknown placeholder '{{{}}}'", name, n));
    }
  }
  for (std::string_view required : {"input_text", "tag"}) {
    if (count(required) != 1) {
      throw ConfigError(
          fmt::format("template '{}' must contain {{{}}} exactly once", name, required));
    }
  }
  bool with = variant == TemplateVariant::with_dg;
  for (std::string_view dg_field : {"definition", "guidelines"}) {
    auto n = count(dg_field);
    if (with && n != 1) {
      throw ConfigError(
          fmt::format("template '{}' must contain {{{}}} exactly once", name, dg_field));
    }
    if (!with && n != 0) {
      throw ConfigError(fmt::format("template '{}' (without_dg) must not contain {{{}}}", name,
                                    dg_field));
    }
  }
}

RenderedPrompt render_task_prompt(const PromptTemplate& tmpl, std::string_view chunk_text,
                                  const std::string& tag, const DefGuidelines* dg,
                                  const std::string& doc_id, std::size_t chunk_index) {
  tmpl.validate();
  std::map<std::string, std::string> values{{"input_text", std::string(chunk_text)}, {"tag", tag}};
  if (tmpl.variant == TemplateVariant::with_dg) {
    if (dg == nullptr) {
      throw ConfigError(fmt::format("template '{}' needs definition and guidelines for '{}'",
                                    tmpl.name, tag));
    }
    values["definition"] = dg->definition;
    values["guidelines"] = dg->guidelines;
  } else if (dg != nullptr) {
    throw ConfigError(
        fmt::format("template '{}' takes no definition and guidelines (got some for '{}')",
                    tmpl.name, tag));
  }
  return RenderedPrompt{substitute(tmpl.body, values), tag, doc_id, chunk_index};
}

std::string render_target(const std::vector<std::string>& gold_spans) {
  return nlohmann::json(gold_spans).dump();
}

std::vector<std::string> sample_guideline_examples(const std::vector<AnnotatedDoc>& corpus,
                                                   const std::string& tag,
                                                   std::uint64_t rng_seed) {
  std::vector<const AnnotatedDoc*> positives;
  for (const auto& doc : corpus) {
    if (doc.span_count(tag) > 0) positives.push_back(&doc);
  }
  if (positives.size() < 3) {
    throw DataError(fmt::format("tag '{}' has {} positive examples, 3 are needed", tag,
                                positives.size()));
  }
  std::sort(positives.begin(), positives.end(),
            [](const AnnotatedDoc* a, const AnnotatedDoc* b) { return a->id < b->id; });
  auto rng = DeterministicRng::for_stream(rng_seed, "guidelines/" + tag);
  rng.shuffle(std::span(positives));
  return {positives[0]->text, positives[1]->text, positives[2]->text};
}

std::string render_guideline_prompt(std::string_view guideline_template, const std::string& tag,
                                    const std::vector<std::string>& examples) {
  if (examples.size() != 3) {
    throw ConfigError(fmt::format("guideline prompt takes exactly 3 examples, got {}",
                                  examples.size()));
  }
  std::string listing;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i > 0) listing += '\n';
    listing += fmt::format("{}. {}", i + 1, examples[i]);
  }
  return substitute(guideline_template, {{"tag", tag}, {"examples", listing}});
}

TemplateSet default_templates() {
  TemplateSet set;
  set.with_dg = {"task_with_dg",
                 std::string(kTaskPreamble) + std::string(kDgBlock) + std::string(kTaskOutput),
                 TemplateVariant::with_dg};
  set.without_dg = {"task_without_dg", std::string(kTaskPreamble) + std::string(kTaskOutput),
                    TemplateVariant::without_dg};
  set.guideline_generation = std::string(kGuidelineTemplate);
  return set;
}

TemplateSet load_templates(const std::filesystem::path& dir) {
  TemplateSet set = default_templates();
  if (auto p = dir / "task_with_dg.tmpl"; std::filesystem::exists(p)) set.with_dg.body = read_file(p);
  if (auto p = dir / "task_without_dg.tmpl"; std::filesystem::exists(p)) {
    set.without_dg.body = read_file(p);
  }
  if (auto p = dir / "dg_generation.tmpl"; std::filesystem::exists(p)) {
    set.guideline_generation = read_file(p);
  }
  set.with_dg.validate();
  set.without_dg.validate();
  for (const auto& n : placeholders(set.guideline_generation)) {
    if (n != "tag" && n != "examples") {
      throw ConfigError(fmt::format("guideline template: unknown placeholder '{{{}}}'", n));
    }
  }
  return set;
}

}  // namespace zsner::prompting
