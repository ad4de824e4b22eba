#include "zsner/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "zsner/errors.hpp"
#include "zsner/text.hpp"

namespace zsner::evaluation {

std::string MatchPolicy::describe() const {
  return fmt::format("strict unique-span match; case_sensitive={}; normalize={}",
                     case_sensitive ? "true" : "false",
                     normalize == Normalization::none ? "none" : "trim_and_nfc");
}

MatchPolicy match_policy_from_json(const nlohmann::json& j) {
  MatchPolicy p;
  if (!j.is_object()) throw ConfigError("'match_policy' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "case_sensitive" && key != "normalize") {
      throw ConfigError(fmt::format("match_policy: unknown key '{}'", key));
    }
  }
  if (auto it = j.find("case_sensitive"); it != j.end()) {
    if (!it->is_boolean()) throw ConfigError("match_policy.case_sensitive must be a boolean");
    p.case_sensitive = it->get<bool>();
  }
  if (auto it = j.find("normalize"); it != j.end()) {
    auto v = it->is_string() ? it->get<std::string>() : std::string();
    if (v == "none") {
      p.normalize = Normalization::none;
    } else if (v == "trim_and_nfc") {
      p.normalize = Normalization::trim_and_nfc;
    } else {
      throw ConfigError("match_policy.normalize must be 'none' or 'trim_and_nfc'");
    }
  }
  return p;
}

nlohmann::json to_json(const MatchPolicy& p) {
  return {{"case_sensitive", p.case_sensitive},
          {"normalize", p.normalize == Normalization::none ? "none" : "trim_and_nfc"}};
}

std::string canonical_span(std::string_view span, const MatchPolicy& policy) {
  std::string s(span);
  if (policy.normalize == Normalization::trim_and_nfc) s = text::nfc(text::trim_unicode(s));
  if (!policy.case_sensitive) {
    s = text::case_fold(s);
    if (policy.normalize == Normalization::trim_and_nfc) s = text::nfc(s);
  }
  return s;
}

Counts score_pair(const SpanSet& gold, const SpanSet& pred, const MatchPolicy& policy) {
  std::set<std::string> g;
  std::set<std::string> p;
  for (const auto& s : gold) g.insert(canonical_span(s, policy));
  for (const auto& s : pred) p.insert(canonical_span(s, policy));
  std::uint64_t tp = 0;
  for (const auto& s : p) tp += g.count(s);
  return {tp, p.size() - tp, g.size() - tp};
}

double harmonic_f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Prf prf_from_counts(const Counts& c) {
  Prf out;
  out.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  out.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  out.f1 = harmonic_f1(out.precision, out.recall);
  return out;
}

EvalReport aggregate(const std::vector<PairCounts>& counts, const MatchPolicy& policy) {
  EvalReport report;
  report.policy = policy.describe();
  std::set<std::string> docs;
  for (const auto& pc : counts) {
    docs.insert(pc.doc_id);
    report.per_tag[pc.tag].counts += pc.counts;
    report.micro_counts += pc.counts;
  }
  Prf macro_sum;
  std::size_t macro_n = 0;
  for (auto& [tag, score] : report.per_tag) {
    const auto& c = score.counts;
    score.has_instances = c.tp + c.fp + c.fn > 0;
    score.prf = prf_from_counts(c);
    if (!score.has_instances) continue;
    macro_sum.precision += score.prf.precision;
    macro_sum.recall += score.prf.recall;
    macro_sum.f1 += score.prf.f1;
    ++macro_n;
  }
  if (macro_n > 0) {
    double n = static_cast<double>(macro_n);
    report.macro = {macro_sum.precision / n, macro_sum.recall / n, macro_sum.f1 / n};
  }
  report.micro = prf_from_counts(report.micro_counts);
  report.n_docs = docs.size();
  report.n_tags = report.per_tag.size();
  return report;
}

EvalReport evaluate(const std::vector<AnnotatedDoc>& gold, const std::vector<Prediction>& preds,
                    const MatchPolicy& policy) {
  std::set<std::string> gold_ids;
  for (const auto& d : gold) gold_ids.insert(d.id);
  std::set<std::string> pred_ids;
  std::set<std::string> tags;
  std::map<std::pair<std::string, std::string>, const Prediction*> by_key;
  for (const auto& p : preds) {
    pred_ids.insert(p.doc_id);
    tags.insert(p.tag);
    by_key[{p.doc_id, p.tag}] = &p;
  }
  std::vector<std::string> only_gold;
  std::vector<std::string> only_pred;
  std::set_difference(gold_ids.begin(), gold_ids.end(), pred_ids.begin(), pred_ids.end(),
                      std::back_inserter(only_gold));
  std::set_difference(pred_ids.begin(), pred_ids.end(), gold_ids.begin(), gold_ids.end(),
                      std::back_inserter(only_pred));
  if (!only_gold.empty() || !only_pred.empty()) {
    throw DataError(fmt::format(
        "prediction and gold document ids differ; only in gold: [{}]; only in predictions: [{}]",
        fmt::join(only_gold, ", "), fmt::join(only_pred, ", ")));
  }
  static const SpanSet kEmpty;
  std::vector<PairCounts> counts;
  counts.reserve(gold.size() * tags.size());
  for (const auto& doc : gold) {
    for (const auto& tag : tags) {
      SpanSet g;
      if (auto it = doc.gold.find(tag); it != doc.gold.end()) g.insert(it->second.begin(), it->second.end());
      auto pit = by_key.find({doc.id, tag});
      const SpanSet& p = pit == by_key.end() ? kEmpty : pit->second->spans;
      counts.push_back({doc.id, tag, score_pair(g, p, policy)});
    }
  }
  return aggregate(counts, policy);
}

RunStats summarize(std::string metric, const std::vector<double>& values) {
  RunStats s;
  s.metric = std::move(metric);
  s.n_runs = values.size();
  if (values.empty()) throw ValidationError("no values to summarize");
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    s.mean = values.front();
    s.std = 0.0;
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

std::map<std::string, RunStats> aggregate_runs(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ValidationError("aggregate_runs needs at least one report");
  auto tag_names = [](const EvalReport& r) {
    std::vector<std::string> names;
    for (const auto& [tag, _] : r.per_tag) names.push_back(tag);
    return names;
  };
  const auto universe = tag_names(reports.front());
  for (const auto& r : reports) {
    if (tag_names(r) != universe) throw ValidationError("runs do not share the same tag universe");
  }
  std::map<std::string, std::vector<double>> series;
  for (const auto& r : reports) {
    series["micro_precision"].push_back(r.micro.precision);
    series["micro_recall"].push_back(r.micro.recall);
    series["micro_f1"].push_back(r.micro.f1);
    series["macro_precision"].push_back(r.macro.precision);
    series["macro_recall"].push_back(r.macro.recall);
    series["macro_f1"].push_back(r.macro.f1);
    for (const auto& [tag, score] : r.per_tag) series["tag/" + tag + "/f1"].push_back(score.prf.f1);
  }
  std::map<std::string, RunStats> out;
  for (auto& [metric, values] : series) out.emplace(metric, summarize(metric, values));
  return out;
}

std::vector<nlohmann::ordered_json> report_records(const EvalReport& report) {
  auto record = [](std::string_view kind, const std::string& name, const Counts& c, const Prf& p) {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    if (!name.empty()) j["tag"] = name;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["fn"] = c.fn;
    j["precision"] = p.precision;
    j["recall"] = p.recall;
    j["f1"] = p.f1;
    return j;
  };
  std::vector<nlohmann::ordered_json> out;
  for (const auto& [tag, score] : report.per_tag) {
    auto j = record("tag", tag, score.counts, score.prf);
    if (!score.has_instances) j["no_instances"] = true;
    out.push_back(std::move(j));
  }
  auto micro = record("micro", "", report.micro_counts, report.micro);
  micro["n_docs"] = report.n_docs;
  micro["n_tags"] = report.n_tags;
  micro["policy"] = report.policy;
  out.push_back(std::move(micro));
  nlohmann::ordered_json macro;
  macro["kind"] = "macro";
  macro["precision"] = report.macro.precision;
  macro["recall"] = report.macro.recall;
  macro["f1"] = report.macro.f1;
  macro["n_tags_averaged"] = std::count_if(report.per_tag.begin(), report.per_tag.end(),
                                           [](const auto& kv) { return kv.second.has_instances; });
  out.push_back(std::move(macro));
  return out;
}

nlohmann::ordered_json to_json(const std::map<std::string, RunStats>& stats) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [metric, s] : stats) {
    j.push_back({{"metric", metric},
                 {"mean", s.mean},
                 {"std", s.std},
                 {"n_runs", s.n_runs},
                 {"std_kind", "population"}});
  }
  return j;
}

std::string format_cell(const Cell& cell, int decimals) {
  if (cell.spread) return fmt::format("{:.{}f} ± {:.{}f}", cell.value, decimals, *cell.spread, decimals);
  return fmt::format("{:.{}f}", cell.value, decimals);
}

std::string render_table(ReportLayout layout, const std::vector<std::string>& benchmarks,
                         const std::vector<TableRow>& rows) {
  std::vector<std::string> header{"Model"};
  int decimals = 1;
  std::size_t width = 0;
  if (layout == ReportLayout::ood_table) {
    header.insert(header.end(), benchmarks.begin(), benchmarks.end());
    header.push_back("AVG");
    width = benchmarks.size() + 1;
  } else {
    header.insert(header.end(), {"μ-Precision", "μ-Recall", "μ-F1", "M-Precision", "M-Recall", "M-F1"});
    decimals = 2;
    width = 6;
  }
  std::string out = fmt::format("| {} |\n", fmt::join(header, " | "));
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += "---|";
  out += '\n';
  for (const auto& row : rows) {
    std::vector<Cell> cells = row.cells;
    if (layout == ReportLayout::ood_table && cells.size() == benchmarks.size()) {
      double sum = 0.0;
      for (const auto& c : cells) sum += c.value;
      cells.push_back({cells.empty() ? 0.0 : sum / static_cast<double>(cells.size()), std::nullopt});
    }
    if (cells.size() != width) {
      throw ValidationError(fmt::format("row '{}' has {} cells, the table has {} columns",
                                        row.label, cells.size(), width));
    }
    std::vector<std::string> text{row.label};
    for (const auto& c : cells) text.push_back(format_cell(c, decimals));
    out += fmt::format("| {} |\n", fmt::join(text, " | "));
  }
  return out;
}

std::string render_report(const EvalReport& report, ReportLayout layout, const std::string& label,
                          const std::string& benchmark) {
  std::vector<TableRow> rows;
  if (!report.per_tag.empty()) {
    auto pct = [](double v) { return Cell{100.0 * v, std::nullopt}; };
    if (layout == ReportLayout::buster_table) {
      rows.push_back({label,
                      {pct(report.micro.precision), pct(report.micro.recall), pct(report.micro.f1),
                       pct(report.macro.precision), pct(report.macro.recall), pct(report.macro.f1)}});
    } else {
      rows.push_back({label, {pct(report.micro.f1)}});
    }
  }
  return render_table(layout, {benchmark}, rows);
}

std::string render_runs(const std::map<std::string, RunStats>& stats, ReportLayout layout,
                        const std::string& label, const std::string& benchmark) {
  auto cell = [&](const char* metric) {
    auto it = stats.find(metric);
    if (it == stats.end()) throw ValidationError(fmt::format("missing run metric '{}'", metric));
    return Cell{100.0 * it->second.mean, 100.0 * it->second.std};
  };
  std::vector<TableRow> rows;
  if (layout == ReportLayout::buster_table) {
    rows.push_back({label,
                    {cell("micro_precision"), cell("micro_recall"), cell("micro_f1"),
                     cell("macro_precision"), cell("macro_recall"), cell("macro_f1")}});
  } else {
    auto f1 = cell("micro_f1");
    rows.push_back({label, {f1, f1}});
  }
  return render_table(layout, {benchmark}, rows);
}

}  // namespace zsner::evaluation
