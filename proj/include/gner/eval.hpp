#pragma once

// Strict entity matching, micro-averaged precision/recall/F1, aggregation
// over repeated runs, and hard-subset score deltas.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gner/core.hpp"

namespace gner {

// An entity counts as correct only when label and the exact fragment set
// both match (span_strict), or when (label, surface string) matches as a
// multiset ignoring positions (surface_multiset).
enum class MatchMode { span_strict, surface_multiset };

std::string_view match_mode_name(MatchMode m);
std::optional<MatchMode> parse_match_mode(std::string_view name);

struct MatchCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

MatchCounts match_entities(const std::vector<Entity>& gold, const std::vector<Entity>& pred,
                           std::string_view text, MatchMode mode);

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Micro scores with the 0/0 -> 0 convention.
Prf micro_prf(const MatchCounts& c);

// One scored slice of an evaluation (overall, or one breakdown key).
struct MetricRow {
  MatchCounts counts;
  Prf scores;
};

struct EvalReport {
  MetricRow overall;
  std::map<std::string, MetricRow> by_key;  // e.g. dataset or dataset/format
};

EvalReport make_report(const MatchCounts& overall,
                       const std::map<std::string, MatchCounts>& by_key);

// Mean and population standard deviation over repeated draws.
struct AggregateStat {
  double mean = 0.0, stddev = 0.0;
};

AggregateStat aggregate_values(const std::vector<double>& values);

struct AggregatePrf {
  AggregateStat precision, recall, f1;
};

struct AggregateReport {
  AggregatePrf overall;
  std::map<std::string, AggregatePrf> by_key;  // keys = union over runs
};

AggregateReport aggregate_reports(const std::vector<EvalReport>& runs);

// Score deltas on structurally hard subsets: how much worse the system does
// on nested / discontinuous gold entities than on plain (simple) ones. Each
// subset row filters gold to that subset and counts a prediction as tp only
// when it matches a gold entity of the subset; predictions matching no gold
// at all are shared as fp across every row. Deltas are simple-subset F1
// minus hard-subset F1; empty subsets yield no value.
struct ComplexReport {
  MetricRow overall;
  std::optional<MetricRow> simple;
  std::optional<MetricRow> nested;
  std::optional<MetricRow> discontinuous;
  std::optional<double> delta_nested;   // simple F1 - nested F1
  std::optional<double> delta_discont;  // simple F1 - discontinuous F1
};

ComplexReport complex_delta(const std::vector<AnnotatedDoc>& gold,
                            const std::map<std::string, std::vector<Entity>>& pred_by_doc);

// Fixed-width text table of a report, one row per key plus OVERALL.
std::string render_table(const EvalReport& report);
std::string render_aggregate_table(const AggregateReport& report);

}  // namespace gner
