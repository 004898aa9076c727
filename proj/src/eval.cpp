#include "gner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gner {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_pm(const AggregateStat& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f (±%.4f)", s.mean, s.stddev);
  return buf;
}

// Multiset intersection size over arbitrary keys.
template <typename Key>
MatchCounts multiset_match(const std::vector<Key>& gold, const std::vector<Key>& pred) {
  std::map<Key, std::size_t> bag;
  for (const Key& k : gold) ++bag[k];
  std::size_t tp = 0;
  for (const Key& k : pred) {
    auto it = bag.find(k);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++tp;
    }
  }
  return {tp, pred.size() - tp, gold.size() - tp};
}

}  // namespace

std::string_view match_mode_name(MatchMode m) {
  return m == MatchMode::span_strict ? "span_strict" : "surface_multiset";
}

std::optional<MatchMode> parse_match_mode(std::string_view name) {
  if (name == "span_strict") return MatchMode::span_strict;
  if (name == "surface_multiset") return MatchMode::surface_multiset;
  return std::nullopt;
}

MatchCounts match_entities(const std::vector<Entity>& gold, const std::vector<Entity>& pred,
                           std::string_view text, MatchMode mode) {
  if (mode == MatchMode::span_strict) {
    using Key = std::pair<std::string, std::vector<Fragment>>;
    std::vector<Key> g, p;
    for (const auto& e : gold) g.emplace_back(e.label, e.fragments);
    for (const auto& e : pred) p.emplace_back(e.label, e.fragments);
    return multiset_match(g, p);
  }
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> g, p;
  for (const auto& e : gold) g.emplace_back(e.label, surface_of(e, text));
  for (const auto& e : pred) p.emplace_back(e.label, surface_of(e, text));
  return multiset_match(g, p);
}

Prf micro_prf(const MatchCounts& c) {
  Prf out;
  const double tp = static_cast<double>(c.tp);
  out.precision = (c.tp + c.fp) ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  out.recall = (c.tp + c.fn) ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

EvalReport make_report(const MatchCounts& overall,
                       const std::map<std::string, MatchCounts>& by_key) {
  EvalReport r;
  r.overall = {overall, micro_prf(overall)};
  for (const auto& [k, c] : by_key) r.by_key[k] = {c, micro_prf(c)};
  return r;
}

AggregateStat aggregate_values(const std::vector<double>& values) {
  AggregateStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

AggregateReport aggregate_reports(const std::vector<EvalReport>& runs) {
  AggregateReport out;
  auto stat_of = [&](auto&& getter) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(getter(r));
    return aggregate_values(v);
  };
  out.overall.precision = stat_of([](const EvalReport& r) { return r.overall.scores.precision; });
  out.overall.recall = stat_of([](const EvalReport& r) { return r.overall.scores.recall; });
  out.overall.f1 = stat_of([](const EvalReport& r) { return r.overall.scores.f1; });

  std::vector<std::string> keys;
  for (const auto& r : runs)
    for (const auto& [k, row] : r.by_key) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  for (const auto& key : keys) {
    // A key missing from one run scores zero there: the slice produced
    // nothing that round.
    auto value = [&](auto&& sel) {
      std::vector<double> v;
      for (const auto& r : runs) {
        auto it = r.by_key.find(key);
        v.push_back(it == r.by_key.end() ? 0.0 : sel(it->second.scores));
      }
      return aggregate_values(v);
    };
    AggregatePrf agg;
    agg.precision = value([](const Prf& p) { return p.precision; });
    agg.recall = value([](const Prf& p) { return p.recall; });
    agg.f1 = value([](const Prf& p) { return p.f1; });
    out.by_key[key] = agg;
  }
  return out;
}

ComplexReport complex_delta(const std::vector<AnnotatedDoc>& gold,
                            const std::map<std::string, std::vector<Entity>>& pred_by_doc) {
  MatchCounts all, simple, nested, discont;
  std::size_t simple_gold = 0, nested_gold = 0, discont_gold = 0;

  for (const auto& doc : gold) {
    const StructureReport rep = classify(doc);
    std::vector<bool> is_nested(doc.entities.size(), false), is_discont(doc.entities.size(), false);
    for (std::size_t i : rep.nested) is_nested[i] = true;
    for (std::size_t i : rep.discontinuous) is_discont[i] = true;
    nested_gold += rep.nested.size();
    discont_gold += rep.discontinuous.size();

    using Key = std::pair<std::string, std::vector<Fragment>>;
    std::map<Key, std::size_t> bag;
    std::size_t pred_count = 0;
    if (auto it = pred_by_doc.find(doc.id); it != pred_by_doc.end()) {
      pred_count = it->second.size();
      for (const auto& e : it->second) ++bag[{e.label, e.fragments}];
    }
    std::size_t doc_tp = 0;
    for (std::size_t i = 0; i < doc.entities.size(); ++i) {
      const Entity& e = doc.entities[i];
      const bool plain = !is_nested[i] && !is_discont[i];
      if (plain) ++simple_gold;
      auto it = bag.find({e.label, e.fragments});
      const bool hit = it != bag.end() && it->second > 0;
      if (hit) {
        --it->second;
        ++doc_tp;
        ++all.tp;
        if (plain) ++simple.tp;
        if (is_nested[i]) ++nested.tp;
        if (is_discont[i]) ++discont.tp;
      } else {
        ++all.fn;
        if (plain) ++simple.fn;
        if (is_nested[i]) ++nested.fn;
        if (is_discont[i]) ++discont.fn;
      }
    }
    all.fp += pred_count - doc_tp;
  }
  // Spurious predictions weigh on every slice's precision alike.
  simple.fp = all.fp;
  nested.fp = all.fp;
  discont.fp = all.fp;

  ComplexReport out;
  out.overall = {all, micro_prf(all)};
  if (simple_gold > 0) out.simple = MetricRow{simple, micro_prf(simple)};
  if (nested_gold > 0) out.nested = MetricRow{nested, micro_prf(nested)};
  if (discont_gold > 0) out.discontinuous = MetricRow{discont, micro_prf(discont)};
  if (out.simple && out.nested)
    out.delta_nested = out.simple->scores.f1 - out.nested->scores.f1;
  if (out.simple && out.discontinuous)
    out.delta_discont = out.simple->scores.f1 - out.discontinuous->scores.f1;
  return out;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  std::size_t width = 7;  // "OVERALL"
  for (const auto& [k, row] : report.by_key) width = std::max(width, k.size());
  auto line = [&](const std::string& key, const MetricRow& row) {
    out << key << std::string(width - key.size() + 2, ' ');
    char buf[128];
    std::snprintf(buf, sizeof(buf), "tp=%-7zu fp=%-7zu fn=%-7zu P=%s R=%s F1=%s", row.counts.tp,
                  row.counts.fp, row.counts.fn, fmt(row.scores.precision).c_str(),
                  fmt(row.scores.recall).c_str(), fmt(row.scores.f1).c_str());
    out << buf << '\n';
  };
  for (const auto& [k, row] : report.by_key) line(k, row);
  line("OVERALL", report.overall);
  return out.str();
}

std::string render_aggregate_table(const AggregateReport& report) {
  std::ostringstream out;
  std::size_t width = 7;
  for (const auto& [k, row] : report.by_key) width = std::max(width, k.size());
  auto line = [&](const std::string& key, const AggregatePrf& row) {
    out << key << std::string(width - key.size() + 2, ' ') << "P=" << fmt_pm(row.precision)
        << "  R=" << fmt_pm(row.recall) << "  F1=" << fmt_pm(row.f1) << '\n';
  };
  for (const auto& [k, row] : report.by_key) line(k, row);
  line("OVERALL", report.overall);
  return out.str();
}

}  // namespace gner
