#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "zsner/model.hpp"

namespace zsner::evaluation {

enum class Normalization { none, trim_and_nfc };

struct MatchPolicy {
  bool case_sensitive = true;
  Normalization normalize = Normalization::trim_and_nfc;

  std::string describe() const;
};

MatchPolicy match_policy_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MatchPolicy& policy);

/// The form a span is compared in under `policy`.
std::string canonical_span(std::string_view span, const MatchPolicy& policy);

/// Strict unique-span matching. Both sides are mapped through the policy
/// first, so spans that normalize alike count once.
Counts score_pair(const SpanSet& gold, const SpanSet& pred, const MatchPolicy& policy = {});

struct PairCounts {
  std::string doc_id;
  std::string tag;
  Counts counts;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); a zero denominator gives 0.
Prf prf_from_counts(const Counts& c);

/// F1 from precision and recall, 0 when both are 0.
double harmonic_f1(double precision, double recall);

/// Per-tag sums, micro scores from the global sums, macro as the unweighted
/// mean over tags that have at least one gold or predicted span.
EvalReport aggregate(const std::vector<PairCounts>& counts, const MatchPolicy& policy = {});

/// Scores predictions against gold. Every doc id must appear on both sides
/// (DataError listing the symmetric difference otherwise). The tag universe is
/// the set of predicted tags; a missing (doc, tag) prediction counts as empty.
EvalReport evaluate(const std::vector<AnnotatedDoc>& gold, const std::vector<Prediction>& preds,
                    const MatchPolicy& policy = {});

/// Mean and population standard deviation per metric across runs. Metrics are
/// micro_/macro_ precision, recall, f1 and tag/<name>/f1. Throws
/// ValidationError on an empty list or differing tag universes.
std::map<std::string, RunStats> aggregate_runs(const std::vector<EvalReport>& reports);

/// Closed-form mean and population std of a sample; exactly zero spread when
/// all values are equal.
RunStats summarize(std::string metric, const std::vector<double>& values);

/// One record per tag, then a micro and a macro record.
std::vector<nlohmann::ordered_json> report_records(const EvalReport& report);
nlohmann::ordered_json to_json(const std::map<std::string, RunStats>& stats);

// ---- text tables -----------------------------------------------------------

enum class ReportLayout { ood_table, buster_table };

/// A table value in percent, with an optional spread.
struct Cell {
  double value = 0.0;
  std::optional<double> spread;
};

struct TableRow {
  std::string label;
  std::vector<Cell> cells;
};

/// "value" or "value ± spread" with the given number of decimals.
std::string format_cell(const Cell& cell, int decimals);

/// Pipe-separated table. ood_table: one F1 column per benchmark then AVG,
/// 1 decimal. buster_table: micro then macro P, R, F1, 2 decimals.
std::string render_table(ReportLayout layout, const std::vector<std::string>& benchmarks,
                         const std::vector<TableRow>& rows);

/// One report as one row. buster_table: micro/macro P, R, F1. ood_table: the
/// report is a single benchmark column named `benchmark`, plus AVG. A report
/// with no tags renders the header only.
std::string render_report(const EvalReport& report, ReportLayout layout,
                          const std::string& label = "run", const std::string& benchmark = "F1");

/// Same as render_report, with mean ± std cells built from aggregate_runs.
std::string render_runs(const std::map<std::string, RunStats>& stats, ReportLayout layout,
                        const std::string& label = "runs", const std::string& benchmark = "F1");

}  // namespace zsner::evaluation
