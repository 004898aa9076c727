#include "gner/core.hpp"

#include <algorithm>
#include <numeric>

#include "gner/text.hpp"

namespace gner {

Entity Entity::make(std::string label, std::vector<Fragment> fragments) {
  if (label.empty()) throw Error("entity label must be non-empty");
  if (fragments.empty()) throw Error("entity must have at least one fragment");
  std::sort(fragments.begin(), fragments.end());
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    if (f.start >= f.end)
      throw Error("entity fragment [" + std::to_string(f.start) + "," + std::to_string(f.end) +
                  ") is empty or inverted");
    if (i > 0 && fragments[i - 1].end > f.start)
      throw Error("entity fragments overlap at offset " + std::to_string(f.start));
  }
  return Entity{std::move(label), std::move(fragments)};
}

AnnotatedDoc AnnotatedDoc::make(std::string id, std::string dataset, std::string text,
                                std::vector<Entity> entities) {
  const std::size_t len = scalar_length(text);
  for (const auto& e : entities) {
    if (e.fragments.empty()) throw Error("doc " + id + ": entity without fragments");
    if (e.fragments.back().end > len)
      throw Error("doc " + id + ": entity '" + e.label + "' ends at " +
                  std::to_string(e.fragments.back().end) + " past text length " +
                  std::to_string(len));
  }
  std::sort(entities.begin(), entities.end());
  for (std::size_t i = 1; i < entities.size(); ++i) {
    if (entities[i] == entities[i - 1])
      throw Error("doc " + id + ": duplicate entity '" + entities[i].label + "' at offset " +
                  std::to_string(entities[i].range().start));
  }
  return AnnotatedDoc{std::move(id), std::move(dataset), std::move(text), std::move(entities)};
}

std::string_view format_name(FormatId f) {
  switch (f) {
    case FormatId::conv_term: return "conv_term";
    case FormatId::single_tag: return "single_tag";
    case FormatId::multi_tag: return "multi_tag";
    case FormatId::single_code: return "single_code";
    case FormatId::multi_code: return "multi_code";
    case FormatId::single_term: return "single_term";
    case FormatId::multi_term: return "multi_term";
    case FormatId::single_span: return "single_span";
    case FormatId::multi_span: return "multi_span";
    case FormatId::multi_triple: return "multi_triple";
    case FormatId::multi_bio: return "multi_bio";
    case FormatId::multi_brat: return "multi_brat";
  }
  return "?";
}

std::optional<FormatId> parse_format(std::string_view name) {
  for (FormatId f : kAllFormats)
    if (format_name(f) == name) return f;
  return std::nullopt;
}

const FormatTraits& traits_of(FormatId f) {
  static const FormatTraits conv{Arity::per_type, true, false, true};
  static const FormatTraits per_type{Arity::per_type, true, false, false};
  static const FormatTraits per_type_flat{Arity::per_type, false, false, false};
  static const FormatTraits per_type_span{Arity::per_type, false, true, false};
  static const FormatTraits all{Arity::all_types, true, false, false};
  static const FormatTraits all_flat{Arity::all_types, false, false, false};
  static const FormatTraits all_span_flat{Arity::all_types, false, true, false};
  static const FormatTraits all_span{Arity::all_types, true, true, false};
  switch (f) {
    case FormatId::conv_term: return conv;
    case FormatId::single_tag: return per_type_flat;
    case FormatId::multi_tag: return all_flat;
    case FormatId::single_code: return per_type;
    case FormatId::multi_code: return all;
    case FormatId::single_term: return per_type;
    case FormatId::multi_term: return all;
    case FormatId::single_span: return per_type_span;
    case FormatId::multi_span: return all_span_flat;
    case FormatId::multi_triple: return all;
    case FormatId::multi_bio: return all_flat;
    case FormatId::multi_brat: return all_span;
  }
  static const FormatTraits fallback{};
  return fallback;
}

StructureReport classify(const AnnotatedDoc& doc) {
  const std::size_t n = doc.entities.size();
  std::vector<bool> entangled(n, false);

  // Sweep over ranges sorted by start: an interval overlaps some earlier one
  // iff its start precedes the running max end; marking the max-end holder as
  // well covers every overlapping pair.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return doc.entities[a].range() < doc.entities[b].range();
  });
  std::size_t max_end = 0, holder = 0;
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    const Fragment r = doc.entities[i].range();
    if (any && r.start < max_end) {
      entangled[i] = true;
      entangled[holder] = true;
    }
    if (!any || r.end > max_end) {
      max_end = r.end;
      holder = i;
    }
    any = true;
  }

  StructureReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    if (doc.entities[i].discontinuous())
      rep.discontinuous.push_back(i);
    else if (entangled[i])
      rep.nested.push_back(i);
    else
      rep.simple.push_back(i);
  }
  return rep;
}

bool compatible(FormatId f, const AnnotatedDoc& doc) {
  if (traits_of(f).supports_discontinuous) return true;
  return std::none_of(doc.entities.begin(), doc.entities.end(),
                      [](const Entity& e) { return e.discontinuous(); });
}

std::string surface_of(const Entity& e, std::string_view text) {
  const TextIndex idx(text);
  std::string out;
  for (std::size_t i = 0; i < e.fragments.size(); ++i) {
    if (i) out += ' ';
    out += idx.slice(e.fragments[i].start, e.fragments[i].end);
  }
  return out;
}

}  // namespace gner
