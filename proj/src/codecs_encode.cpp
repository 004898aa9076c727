#include <algorithm>
#include <set>

#include <json.hpp>

#include "gner/codecs.hpp"
#include "gner/text.hpp"

namespace gner {
namespace {

using json = nlohmann::ordered_json;

std::string fold_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// JSON string literal including the quotes.
std::string quoted(const std::string& s) { return json(s).dump(); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Instruction paragraph per format. {types} is the inventory joined by ", ".
std::string instruction_for(FormatId f, const std::vector<std::string>& inventory) {
  const std::string types = join(inventory, ", ");
  switch (f) {
    case FormatId::conv_term:
      return "In each round of dialogue, we will provide you with an entity type. Please find "
             "all entities of that type in the input text and answer in the format [\"entity "
             "1\", \"entity 2\", ...], return [] if there is none.";
    case FormatId::single_term:
      return "Please find all " + types +
             " entities in the input text and answer in the format [\"entity 1\", \"entity 2\", "
             "...], return [] if there is none.";
    case FormatId::single_tag:
      return "Please find all " + types +
             " entities in the input text. Mark the beginning of each entity with @@ and its end "
             "with ##, and answer with the marked text.";
    case FormatId::single_code:
      return "Please complete the python function below, appending the surface string of every " +
             types + " entity in input_text to entity_list.";
    case FormatId::single_span:
      return "Please find all " + types +
             " entities in the input text and answer with their character spans in the format "
             "[[start,end],...], return [] if there is none.";
    case FormatId::multi_term:
      return "Please find all entities of the types " + types +
             " in the input text and answer in the format [{\"text\": entity, \"type\": type}, "
             "...], return [] if there is none.";
    case FormatId::multi_tag:
      return "Please find all entities of the types " + types +
             " in the input text. Wrap each entity in tags naming its type, like "
             "<type>entity</type>, and answer with the tagged text.";
    case FormatId::multi_code:
      return "Please complete the python function below, appending every entity in input_text "
             "to entity_list as {\"text\": entity, \"type\": type}. The entity types are " +
             types + ".";
    case FormatId::multi_span:
      return "Please find all entities of the types " + types +
             " in the input text and answer with their character spans in the format [{\"span\": "
             "[start, end], \"type\": type}, ...], return [] if there is none.";
    case FormatId::multi_triple:
      return "Please find all entities of the types " + types +
             " in the input text and answer with one line per entity in the format: entity; is "
             "a; type.";
    case FormatId::multi_bio:
      return "Please tag the input text in BIO format with the types " + types +
             ". Answer with one line per nesting layer, each line holding one tag per "
             "whitespace-separated token.";
    case FormatId::multi_brat:
      return "Please find all entities of the types " + types +
             " in the input text and answer with one line per entity in the format: "
             "T<n>\t<type> <start> <end>\t<entity>.";
  }
  return "";
}

struct Ctx {
  const AnnotatedDoc& doc;
  const TextIndex idx;
  const std::vector<std::string>& inventory;
  std::vector<std::size_t> order;          // listing order over doc.entities
  std::vector<std::string> surfaces;       // per entity index

  Ctx(const AnnotatedDoc& d, const std::vector<std::string>& inv)
      : doc(d), idx(d.text), inventory(inv) {
    surfaces.reserve(doc.entities.size());
    for (const auto& e : doc.entities) surfaces.push_back(surface_of(e, doc.text));
    order = listing_order(doc.entities, doc.text);
  }

  // Listing-ordered entity indices, optionally restricted to one label.
  std::vector<std::size_t> listed(const std::string* label) const {
    std::vector<std::size_t> out;
    for (std::size_t i : order)
      if (!label || doc.entities[i].label == *label) out.push_back(i);
    return out;
  }
};

std::string term_list(const Ctx& c, const std::vector<std::size_t>& idxs) {
  std::vector<std::string> items;
  items.reserve(idxs.size());
  for (std::size_t i : idxs) items.push_back(quoted(c.surfaces[i]));
  return "[" + join(items, ", ") + "]";
}

std::string payload_multi_term(const Ctx& c) {
  std::vector<std::string> items;
  for (std::size_t i : c.order)
    items.push_back("{\"text\": " + quoted(c.surfaces[i]) + ", \"type\": " +
                    quoted(c.doc.entities[i].label) + "}");
  return "Answer: [" + join(items, ", ") + "]";
}

std::string payload_single_span(const Ctx& c, const std::string& type) {
  std::vector<std::string> items;
  for (std::size_t i : c.listed(&type)) {
    const Fragment r = c.doc.entities[i].range();
    items.push_back("[" + std::to_string(r.start) + "," + std::to_string(r.end) + "]");
  }
  return "Answer: [" + join(items, ",") + "]";
}

std::string payload_multi_span(const Ctx& c) {
  std::vector<std::string> items;
  for (std::size_t i : c.order) {
    const Fragment r = c.doc.entities[i].range();
    items.push_back("{\"span\": [" + std::to_string(r.start) + ", " + std::to_string(r.end) +
                    "], \"type\": " + quoted(c.doc.entities[i].label) + "}");
  }
  return "Answer: [" + join(items, ", ") + "]";
}

std::string payload_multi_triple(const Ctx& c) {
  std::string out = "Answer:";
  for (std::size_t i : c.order)
    out += "\n" + c.surfaces[i] + "; is a; " + c.doc.entities[i].label;
  return out;
}

std::string payload_multi_brat(const Ctx& c) {
  std::string out = "Answer:";
  std::size_t n = 0;
  for (std::size_t i : c.order) {
    const Entity& e = c.doc.entities[i];
    out += "\nT" + std::to_string(++n) + "\t" + e.label;
    for (std::size_t k = 0; k < e.fragments.size(); ++k) {
      out += k ? ";" : " ";
      out += std::to_string(e.fragments[k].start) + " " + std::to_string(e.fragments[k].end);
    }
    out += "\t" + c.surfaces[i];
  }
  return out;
}

std::string code_skeleton(const Ctx& c, const std::string& comment,
                          const std::vector<std::string>& appends) {
  std::string out = "Answer:\n```py\n";
  out += "def named_entity_recognition(input_text): \n";
  out += "        \"\"\" extract entities from the input_text. \"\"\"\n";
  out += "        input_text = " + quoted(c.doc.text) + "\n";
  out += "        entity_list = [] \n";
  out += "        " + comment + "\n";
  for (const auto& a : appends) out += "        entity_list.append(" + a + ")\n";
  out += "```";
  return out;
}

std::string payload_multi_code(const Ctx& c) {
  std::vector<std::string> appends;
  for (std::size_t i : c.order)
    appends.push_back("{\"text\": " + quoted(c.surfaces[i]) + ", \"type\": " +
                      quoted(c.doc.entities[i].label) + "}");
  return code_skeleton(c, "# extracted entities for " + join(c.inventory, ", ") + " types.",
                       appends);
}

std::string payload_single_code(const Ctx& c, const std::string& type) {
  std::vector<std::string> appends;
  for (std::size_t i : c.listed(&type)) appends.push_back(quoted(c.surfaces[i]));
  return code_skeleton(c, "# extracted entities for " + type + " type.", appends);
}

// Inline tag markup shared by single_tag (@@/##) and multi_tag (<t>/</t>).
// All entities must be contiguous. Markers at the same boundary: closers
// first (innermost first), then openers (outermost first).
std::string tag_markup(const Ctx& c, const std::vector<std::size_t>& idxs, bool typed) {
  struct Marker {
    std::size_t pos;
    int phase;        // 0 = closer, 1 = opener
    std::size_t rank; // emission rank within phase
    std::string body;
  };
  // Containment order: outer entities first.
  std::vector<std::size_t> seq = idxs;
  std::sort(seq.begin(), seq.end(), [&](std::size_t a, std::size_t b) {
    const Fragment ra = c.doc.entities[a].range(), rb = c.doc.entities[b].range();
    if (ra.start != rb.start) return ra.start < rb.start;
    if (ra.end != rb.end) return ra.end > rb.end;
    return c.doc.entities[a].label < c.doc.entities[b].label;
  });
  std::vector<Marker> markers;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Entity& e = c.doc.entities[seq[k]];
    const Fragment r = e.range();
    markers.push_back({r.start, 1, k, typed ? "<" + e.label + ">" : "@@"});
    // Closers pop in reverse opening order: larger rank closes first.
    markers.push_back({r.end, 0, seq.size() - k, typed ? "</" + e.label + ">" : "##"});
  }
  std::stable_sort(markers.begin(), markers.end(), [](const Marker& a, const Marker& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    if (a.phase != b.phase) return a.phase < b.phase;
    return a.rank < b.rank;
  });

  // Escape map per scalar: single_tag doubles @/# runs of length >= 2;
  // multi_tag entity-encodes & < >.
  const std::size_t n = c.idx.scalars();
  auto escaped_char = [&](std::size_t j) -> std::string {
    const std::string_view ch = c.idx.slice(j, j + 1);
    if (typed) {
      if (ch == "&") return "&amp;";
      if (ch == "<") return "&lt;";
      if (ch == ">") return "&gt;";
      return std::string(ch);
    }
    if (ch == "@" || ch == "#") {
      std::size_t lo = j, hi = j + 1;
      while (lo > 0 && c.idx.slice(lo - 1, lo) == ch) --lo;
      while (hi < n && c.idx.slice(hi, hi + 1) == ch) ++hi;
      if (hi - lo >= 2) return std::string(ch) + std::string(ch);
    }
    return std::string(ch);
  };

  std::string out;
  std::size_t m = 0;
  for (std::size_t j = 0; j <= n; ++j) {
    while (m < markers.size() && markers[m].pos == j) out += markers[m++].body;
    if (j < n) out += escaped_char(j);
  }
  return out;
}

std::string payload_single_tag(const Ctx& c, const std::string& type) {
  return "Answer: " + tag_markup(c, c.listed(&type), false);
}

std::string payload_multi_tag(const Ctx& c) {
  std::vector<std::size_t> all(c.doc.entities.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return "Answer: " + tag_markup(c, all, true);
}

std::string payload_multi_bio(const Ctx& c) {
  const std::vector<TokenSpan> toks = c.idx.tokens();
  // Token range per entity: every token its character range touches.
  struct Placed {
    std::size_t first, last;  // inclusive token indices
    const std::string* label;
    Fragment range;
  };
  std::vector<Placed> placed;
  for (const auto& e : c.doc.entities) {
    const Fragment r = e.range();
    std::size_t first = toks.size(), last = 0;
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (toks[t].end > r.start && toks[t].start < r.end) {
        first = std::min(first, t);
        last = std::max(last, t);
      }
    }
    if (first == toks.size()) continue;  // entity covers only whitespace; unreachable for real data
    placed.push_back({first, last, &e.label, r});
  }
  std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    if (a.range.start != b.range.start) return a.range.start < b.range.start;
    const std::size_t la = a.range.end - a.range.start, lb = b.range.end - b.range.start;
    if (la != lb) return la > lb;
    return *a.label < *b.label;
  });

  std::vector<std::vector<std::string>> layers;
  for (const auto& p : placed) {
    std::size_t layer = 0;
    for (;; ++layer) {
      if (layer == layers.size()) layers.emplace_back(toks.size(), "O");
      bool free = true;
      for (std::size_t t = p.first; t <= p.last && free; ++t) free = layers[layer][t] == "O";
      if (free) break;
    }
    for (std::size_t t = p.first; t <= p.last; ++t)
      layers[layer][t] = (t == p.first ? "B-" : "I-") + *p.label;
  }
  if (layers.empty()) layers.emplace_back(toks.size(), "O");

  std::string out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l) out += "\n";
    out += "Layer " + std::to_string(l + 1) + ": " + join(layers[l], " ");
  }
  return out;
}

}  // namespace

std::vector<std::size_t> listing_order(const std::vector<Entity>& entities,
                                       std::string_view text) {
  std::vector<std::string> surfaces, folded;
  surfaces.reserve(entities.size());
  for (const auto& e : entities) surfaces.push_back(surface_of(e, text));
  folded.reserve(entities.size());
  for (const auto& s : surfaces) folded.push_back(fold_ascii(s));

  std::vector<std::size_t> order(entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (folded[a] != folded[b]) return folded[a] < folded[b];
    if (surfaces[a] != surfaces[b]) return surfaces[a] < surfaces[b];
    const Fragment ra = entities[a].range(), rb = entities[b].range();
    if (ra.start != rb.start) return ra.start < rb.start;
    return entities[a].label < entities[b].label;
  });
  return order;
}

std::string render_prompt(const AnnotatedDoc& doc, FormatId f,
                          const std::vector<std::string>& inventory) {
  return "The task you need to complete is named entity recognition. Follow " + doc.dataset +
         " guidelines.\n\n" + instruction_for(f, inventory) + "\n\nText: " + doc.text;
}

EncodedTarget encode(const AnnotatedDoc& doc, FormatId f,
                     const std::vector<std::string>& inventory) {
  if (!compatible(f, doc))
    throw Error("doc " + doc.id + ": format " + std::string(format_name(f)) +
                " cannot express a discontinuous entity");
  const std::set<std::string> known(inventory.begin(), inventory.end());
  for (const auto& e : doc.entities)
    if (!known.count(e.label))
      throw Error("doc " + doc.id + ": label '" + e.label + "' missing from type inventory");

  const Ctx c(doc, inventory);
  EncodedTarget target{f, {}};

  auto per_type = [&](auto&& payload_fn) {
    for (const auto& t : inventory) target.turns.push_back({t, payload_fn(t)});
  };

  switch (f) {
    case FormatId::conv_term:
    case FormatId::single_term:
      per_type([&](const std::string& t) { return "Answer: " + term_list(c, c.listed(&t)); });
      break;
    case FormatId::single_tag:
      per_type([&](const std::string& t) { return payload_single_tag(c, t); });
      break;
    case FormatId::single_code:
      per_type([&](const std::string& t) { return payload_single_code(c, t); });
      break;
    case FormatId::single_span:
      per_type([&](const std::string& t) { return payload_single_span(c, t); });
      break;
    case FormatId::multi_tag:
      target.turns.push_back({std::nullopt, payload_multi_tag(c)});
      break;
    case FormatId::multi_code:
      target.turns.push_back({std::nullopt, payload_multi_code(c)});
      break;
    case FormatId::multi_term:
      target.turns.push_back({std::nullopt, payload_multi_term(c)});
      break;
    case FormatId::multi_span:
      target.turns.push_back({std::nullopt, payload_multi_span(c)});
      break;
    case FormatId::multi_triple:
      target.turns.push_back({std::nullopt, payload_multi_triple(c)});
      break;
    case FormatId::multi_bio:
      target.turns.push_back({std::nullopt, payload_multi_bio(c)});
      break;
    case FormatId::multi_brat:
      target.turns.push_back({std::nullopt, payload_multi_brat(c)});
      break;
  }
  return target;
}

std::optional<int> detect_span_shift(const Entity& reference, const Fragment& candidate,
                                     std::string_view text) {
  if (candidate.start >= candidate.end) return std::nullopt;
  if (candidate.end > scalar_length(text)) return std::nullopt;
  const Fragment r = reference.range();
  if (candidate.end - candidate.start != r.end - r.start) return std::nullopt;
  const long long k =
      static_cast<long long>(candidate.start) - static_cast<long long>(r.start);
  if (k < -8 || k > 8) return std::nullopt;
  return static_cast<int>(k);
}

std::string_view diag_kind_name(DiagKind k) {
  switch (k) {
    case DiagKind::MALFORMED_STRUCTURE: return "MALFORMED_STRUCTURE";
    case DiagKind::UNGROUNDED_SURFACE: return "UNGROUNDED_SURFACE";
    case DiagKind::OUT_OF_BOUNDS_SPAN: return "OUT_OF_BOUNDS_SPAN";
    case DiagKind::UNKNOWN_TYPE: return "UNKNOWN_TYPE";
    case DiagKind::LAYER_MISMATCH: return "LAYER_MISMATCH";
    case DiagKind::DUPLICATE: return "DUPLICATE";
    case DiagKind::SPAN_SHIFT_SUSPECTED: return "SPAN_SHIFT_SUSPECTED";
  }
  return "?";
}

}  // namespace gner
