#include "gner/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "gner/rng.hpp"
#include "gner/text.hpp"

namespace gner {
namespace {

// Pool decoded predictions per doc id.
std::map<std::string, std::vector<Entity>> decode_outputs(
    const std::map<std::string, const AnnotatedDoc*>& docs, const std::vector<RawOutput>& outputs,
    FormatId format, const std::vector<std::string>& inventory) {
  std::map<std::string, std::vector<Entity>> preds;
  for (const auto& raw : outputs) {
    auto it = docs.find(raw.doc_id);
    if (it == docs.end()) throw Error("output for unknown doc id '" + raw.doc_id + "'");
    const AnnotatedDoc& doc = *it->second;
    ParseResult res = decode(raw.output, doc.text, format, raw.type, inventory);
    auto& bucket = preds[raw.doc_id];
    bucket.insert(bucket.end(), std::make_move_iterator(res.entities.begin()),
                  std::make_move_iterator(res.entities.end()));
  }
  return preds;
}

}  // namespace

ShiftHistogram shift_profile(const Corpus& gold, const std::vector<RawOutput>& outputs,
                             FormatId format, const std::vector<std::string>& inventory) {
  if (!traits_of(format).requires_char_spans)
    throw Error("shift profiling needs a span-bearing format, not " +
                std::string(format_name(format)));

  std::map<std::string, const AnnotatedDoc*> docs;
  for (const auto& d : gold.docs) docs[d.id] = &d;
  const auto preds_by_doc = decode_outputs(docs, outputs, format, inventory);

  ShiftHistogram hist;
  for (int k = -8; k <= 8; ++k) hist.counts[k] = 0;

  for (const auto& [doc_id, preds] : preds_by_doc) {
    const AnnotatedDoc& doc = *docs.at(doc_id);
    hist.total_candidates += preds.size();
    std::vector<bool> consumed(doc.entities.size(), false);

    std::vector<const Entity*> leftovers;
    for (const auto& p : preds) {
      bool exact = false;
      for (std::size_t g = 0; g < doc.entities.size(); ++g) {
        if (consumed[g]) continue;
        if (doc.entities[g].label == p.label && doc.entities[g].fragments == p.fragments) {
          consumed[g] = true;
          ++hist.counts[0];
          exact = true;
          break;
        }
      }
      if (!exact) leftovers.push_back(&p);
    }
    for (const Entity* p : leftovers) {
      if (p->discontinuous()) {
        ++hist.ungrounded_count;
        continue;
      }
      // Nearest unconsumed same-label gold whose span length matches.
      std::optional<int> best;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < doc.entities.size(); ++g) {
        if (consumed[g]) continue;
        const Entity& e = doc.entities[g];
        if (e.label != p->label || e.discontinuous()) continue;
        const auto k = detect_span_shift(e, p->range(), doc.text);
        if (!k) continue;
        if (!best || std::abs(*k) < std::abs(*best) || (std::abs(*k) == std::abs(*best) && *k < *best)) {
          best = *k;
          best_g = g;
        }
      }
      if (best) {
        consumed[best_g] = true;
        ++hist.counts[*best];
      } else {
        ++hist.ungrounded_count;
      }
    }
  }
  return hist;
}

EncodedTarget corrupt(const EncodedTarget& target, const CorruptionSpec& spec,
                      const AnnotatedDoc& doc, const std::vector<std::string>& inventory) {
  const bool mention_noise = spec.shift_probability > 0.0 || spec.drop_probability > 0.0 ||
                             spec.spurious_probability > 0.0;
  const bool turn_noise = spec.structural_noise_probability > 0.0;
  if (!mention_noise && !turn_noise) return target;

  EncodedTarget out = target;
  if (mention_noise) {
    const TextIndex idx(doc.text);
    const std::vector<TokenSpan> toks = idx.tokens();

    std::set<std::pair<std::string, std::vector<Fragment>>> taken;
    for (const auto& e : doc.entities) taken.insert({e.label, e.fragments});

    std::vector<Entity> kept;
    std::set<std::pair<std::string, std::vector<Fragment>>> built;
    auto try_add = [&](Entity e) {
      if (built.count({e.label, e.fragments})) return;
      built.insert({e.label, e.fragments});
      kept.push_back(std::move(e));
    };

    for (std::size_t i = 0; i < doc.entities.size(); ++i) {
      const Entity& e = doc.entities[i];
      const std::uint64_t mi = i;

      // Spurious insertions scale with mention count, dropped or not.
      if (keyed_uniform(spec.seed, doc.id, mi, "spurious") < spec.spurious_probability &&
          !toks.empty() && !inventory.empty()) {
        const std::size_t lab = static_cast<std::size_t>(
            keyed_uniform(spec.seed, doc.id, mi, "spurious_label") *
            static_cast<double>(inventory.size()));
        const std::size_t t0 = static_cast<std::size_t>(
            keyed_uniform(spec.seed, doc.id, mi, "spurious_tok") *
            static_cast<double>(toks.size()));
        for (std::size_t step = 0; step < toks.size(); ++step) {
          const TokenSpan& t = toks[(t0 + step) % toks.size()];
          Entity fake =
              Entity::make(inventory[std::min(lab, inventory.size() - 1)], {{t.start, t.end}});
          // A fabricated mention must be genuinely wrong: never a current or
          // original gold mention.
          if (!taken.count({fake.label, fake.fragments}) &&
              !built.count({fake.label, fake.fragments})) {
            try_add(std::move(fake));
            break;
          }
        }
      }

      if (keyed_uniform(spec.seed, doc.id, mi, "drop") < spec.drop_probability) continue;

      Entity kept_entity = e;
      if (keyed_uniform(spec.seed, doc.id, mi, "shift") < spec.shift_probability &&
          spec.shift_max >= spec.shift_min) {
        const int span = spec.shift_max - spec.shift_min + 1;
        const int k = spec.shift_min +
                      static_cast<int>(keyed_uniform(spec.seed, doc.id, mi, "shift_mag") *
                                       static_cast<double>(span));
        bool ok = k != 0;
        std::vector<Fragment> moved;
        for (const Fragment& f : e.fragments) {
          const long long s = static_cast<long long>(f.start) + k;
          const long long en = static_cast<long long>(f.end) + k;
          if (s < 0 || en > static_cast<long long>(idx.scalars())) {
            ok = false;
            break;
          }
          moved.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(en)});
        }
        if (ok) {
          Entity shifted = Entity::make(e.label, std::move(moved));
          if (taken.count({shifted.label, shifted.fragments}) ||
              built.count({shifted.label, shifted.fragments}))
            continue;  // shifted onto another mention: corrupted beyond keeping
          kept_entity = std::move(shifted);
        }
      }
      try_add(std::move(kept_entity));
    }

    const AnnotatedDoc corrupted =
        AnnotatedDoc::make(doc.id, doc.dataset, doc.text, std::move(kept));
    out = encode(corrupted, target.format, inventory);
  }

  if (turn_noise) {
    for (std::size_t t = 0; t < out.turns.size(); ++t) {
      if (keyed_uniform(spec.seed, doc.id, static_cast<std::uint64_t>(t), "noise") >=
          spec.structural_noise_probability)
        continue;
      const double pick =
          keyed_uniform(spec.seed, doc.id, static_cast<std::uint64_t>(t), "noise_variant");
      std::string& payload = out.turns[t].payload;
      if (pick < 1.0 / 3.0) {
        payload = "assistant :: " + payload;
      } else if (pick < 2.0 / 3.0) {
        payload += "\nI hope this helps!";
      } else {
        const bool fenced = payload.find("```") != std::string::npos;
        if (fenced) {
          // Drop fence lines; the code body must still parse.
          std::string stripped;
          std::size_t start = 0;
          while (start <= payload.size()) {
            std::size_t nl = payload.find('\n', start);
            if (nl == std::string::npos) nl = payload.size();
            const std::string line = payload.substr(start, nl - start);
            if (line.rfind("```", 0) != 0) {
              stripped += line;
              stripped += '\n';
            }
            start = nl + 1;
          }
          if (!stripped.empty()) stripped.pop_back();
          payload = std::move(stripped);
        } else {
          payload = "```\n" + payload + "\n```";
        }
      }
    }
  }
  return out;
}

std::vector<CurvePoint> robustness_curve(const Corpus& corpus, FormatId format,
                                         const std::vector<CorruptionSpec>& grid) {
  const std::vector<std::string> inventory = label_inventory({&corpus});
  std::vector<CurvePoint> points;
  points.reserve(grid.size());
  for (const CorruptionSpec& spec : grid) {
    MatchCounts total;
    for (const auto& doc : corpus.docs) {
      if (!compatible(format, doc)) continue;
      const EncodedTarget target = encode(doc, format, inventory);
      const EncodedTarget noisy = corrupt(target, spec, doc, inventory);
      std::vector<Entity> preds;
      std::set<std::pair<std::string, std::vector<Fragment>>> seen;
      for (const auto& turn : noisy.turns) {
        ParseResult res = decode(turn.payload, doc.text, format, turn.queried_type, inventory);
        for (auto& e : res.entities) {
          if (seen.insert({e.label, e.fragments}).second) preds.push_back(std::move(e));
        }
      }
      total += match_entities(doc.entities, preds, doc.text, MatchMode::span_strict);
    }
    points.push_back({spec, total, micro_prf(total)});
  }
  return points;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out =
      "shift_probability,shift_min,shift_max,drop_probability,spurious_probability,"
      "structural_noise_probability,seed,precision,recall,f1\n";
  for (const auto& p : points) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6g,%d,%d,%.6g,%.6g,%.6g,%llu,%.6f,%.6f,%.6f\n",
                  p.spec.shift_probability, p.spec.shift_min, p.spec.shift_max,
                  p.spec.drop_probability, p.spec.spurious_probability,
                  p.spec.structural_noise_probability,
                  static_cast<unsigned long long>(p.spec.seed), p.scores.precision,
                  p.scores.recall, p.scores.f1);
    out += buf;
  }
  return out;
}

}  // namespace gner
