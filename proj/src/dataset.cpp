#include "gner/dataset.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include <json.hpp>

#include "gner/rng.hpp"

namespace gner {
namespace {

using json = nlohmann::ordered_json;

constexpr std::array<FormatId, 7> kSevenBest = {
    FormatId::conv_term,   FormatId::single_tag,  FormatId::multi_tag, FormatId::single_code,
    FormatId::single_term, FormatId::multi_term, FormatId::multi_triple,
};

std::vector<InstructionRecord> expand_records(const AnnotatedDoc& doc,
                                              const std::string& dataset, FormatId f,
                                              const std::vector<std::string>& inventory) {
  std::vector<InstructionRecord> out;
  const FormatTraits& traits = traits_of(f);
  if (traits.conversational) {
    out.push_back({record_messages(doc, f, inventory, std::nullopt), dataset, f, inventory,
                   doc.id});
  } else if (traits.arity == Arity::per_type) {
    for (const auto& t : inventory)
      out.push_back({record_messages(doc, f, inventory, t), dataset, f, {t}, doc.id});
  } else {
    out.push_back({record_messages(doc, f, inventory, std::nullopt), dataset, f, inventory,
                   doc.id});
  }
  return out;
}

}  // namespace

std::string_view build_mode_name(BuildMode m) {
  switch (m) {
    case BuildMode::all: return "all";
    case BuildMode::seven_best: return "7best";
    case BuildMode::term_ner: return "term_ner";
    case BuildMode::only: return "only";
  }
  return "?";
}

std::optional<ModeSpec> parse_mode(std::string_view s) {
  if (s == "all") return ModeSpec{BuildMode::all, std::nullopt};
  if (s == "7best") return ModeSpec{BuildMode::seven_best, std::nullopt};
  if (s == "term_ner") return ModeSpec{BuildMode::term_ner, std::nullopt};
  if (s.rfind("only:", 0) == 0) {
    const auto f = parse_format(s.substr(5));
    if (!f) return std::nullopt;
    return ModeSpec{BuildMode::only, f};
  }
  return std::nullopt;
}

std::vector<FormatId> format_set(const ModeSpec& spec) {
  switch (spec.mode) {
    case BuildMode::all:
      return {kAllFormats.begin(), kAllFormats.end()};
    case BuildMode::seven_best: {
      // Keep canonical ordering.
      std::vector<FormatId> out;
      for (FormatId f : kAllFormats)
        if (std::find(kSevenBest.begin(), kSevenBest.end(), f) != kSevenBest.end())
          out.push_back(f);
      return out;
    }
    case BuildMode::term_ner:
      return {FormatId::single_term, FormatId::multi_term};
    case BuildMode::only:
      if (!spec.only_format) throw Error("mode 'only' needs a format");
      return {*spec.only_format};
  }
  return {};
}

std::vector<ChatMessage> record_messages(const AnnotatedDoc& doc, FormatId format,
                                         const std::vector<std::string>& inventory,
                                         const std::optional<std::string>& queried_type) {
  const FormatTraits& traits = traits_of(format);
  const EncodedTarget target = encode(doc, format, inventory);
  std::vector<ChatMessage> msgs;

  if (traits.conversational) {
    for (std::size_t k = 0; k < target.turns.size(); ++k) {
      const std::string ask = "Type: " + *target.turns[k].queried_type;
      msgs.push_back({"user", k == 0 ? render_prompt(doc, format, inventory) + "\n\n" + ask : ask});
      msgs.push_back({"assistant", target.turns[k].payload});
    }
    return msgs;
  }
  if (traits.arity == Arity::per_type) {
    if (!queried_type) throw Error("per-type format needs a queried type");
    const auto it = std::find_if(target.turns.begin(), target.turns.end(), [&](const Turn& t) {
      return t.queried_type == *queried_type;
    });
    if (it == target.turns.end())
      throw Error("type '" + *queried_type + "' not in the encoded turns");
    msgs.push_back({"user", render_prompt(doc, format, {*queried_type})});
    msgs.push_back({"assistant", it->payload});
    return msgs;
  }
  msgs.push_back({"user", render_prompt(doc, format, inventory)});
  msgs.push_back({"assistant", target.turns.front().payload});
  return msgs;
}

BuildOutput build_split(const BuildConfig& config, Split split, std::uint64_t draw) {
  const std::vector<FormatId> fset = format_set(config.mode);
  BuildOutput out;

  // Datasets in ascending name order; inventory spans every provided split.
  std::map<std::string, const Corpus*> split_corpus;
  std::map<std::string, std::vector<const Corpus*>> all_corpora;
  for (const auto& c : config.corpora) {
    all_corpora[c.name].push_back(&c);
    if (c.split != split) continue;
    if (!split_corpus.emplace(c.name, &c).second)
      throw Error("two corpora named '" + c.name + "' for split " +
                  std::string(split_name(split)));
  }
  const std::size_t cap = config.caps.of(split);
  for (const auto& [name, corpus] : split_corpus) {
    const std::vector<std::string> inventory = label_inventory(all_corpora[name]);
    if (inventory.empty()) {
      out.warnings.push_back("dataset " + name + ": no labels anywhere; skipped");
      continue;
    }
    DetRng rng(derive_key(config.seed, draw, name, split_name(split)));
    std::vector<std::size_t> order(corpus->docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::size_t count = 0;
    for (std::size_t idx : order) {
      const AnnotatedDoc& doc = corpus->docs[idx];
      std::vector<InstructionRecord> recs;
      if (split == Split::test) {
        for (FormatId f : fset)
          if (compatible(f, doc)) {
            auto r = expand_records(doc, name, f, inventory);
            recs.insert(recs.end(), std::make_move_iterator(r.begin()),
                        std::make_move_iterator(r.end()));
          }
        if (recs.empty()) {
          out.warnings.push_back("dataset " + name + ": doc " + doc.id +
                                 " excluded (no compatible format)");
          continue;
        }
      } else {
        std::vector<FormatId> compat;
        for (FormatId f : fset)
          if (compatible(f, doc)) compat.push_back(f);
        if (compat.empty()) {
          out.warnings.push_back("dataset " + name + ": doc " + doc.id +
                                 " excluded (no compatible format)");
          continue;
        }
        const FormatId f = compat[rng.next_below(compat.size())];
        recs = expand_records(doc, name, f, inventory);
      }
      if (count + recs.size() > cap) break;
      count += recs.size();
      out.records.insert(out.records.end(), std::make_move_iterator(recs.begin()),
                         std::make_move_iterator(recs.end()));
    }
    if (count == 0)
      out.warnings.push_back("dataset " + name + ": no records for split " +
                             std::string(split_name(split)));
  }
  if (out.records.empty())
    throw Error("split " + std::string(split_name(split)) + " produced no records");
  return out;
}

std::vector<std::array<BuildOutput, 3>> draw_samples(const BuildConfig& config,
                                                     std::size_t n_draws) {
  std::vector<std::array<BuildOutput, 3>> out;
  out.reserve(n_draws);
  for (std::size_t d = 0; d < n_draws; ++d)
    out.push_back({build_split(config, Split::train, d), build_split(config, Split::dev, d),
                   build_split(config, Split::test, d)});
  return out;
}

void write_records_jsonl(const std::vector<InstructionRecord>& records, std::ostream& out) {
  for (const auto& rec : records) {
    json j;
    json msgs = json::array();
    for (const auto& m : rec.messages) {
      json jm;
      jm["role"] = m.role;
      jm["content"] = m.content;
      msgs.push_back(std::move(jm));
    }
    j["messages"] = std::move(msgs);
    j["dataset"] = rec.dataset;
    j["format"] = std::string(format_name(rec.format));
    j["types"] = rec.types;
    j["doc_id"] = rec.doc_id;
    out << j.dump() << '\n';
  }
}

}  // namespace gner
