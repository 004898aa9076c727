#pragma once

// Core data model: fragments, entities, annotated documents, output-format
// identities and their traits, and structural classification.

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gner {

// Base error for data problems (bad annotations, bad files).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Error while parsing an external file; message carries location context.
struct ParseError : Error {
  using Error::Error;
};

// Half-open run of Unicode scalar offsets [start, end).
struct Fragment {
  std::size_t start = 0;
  std::size_t end = 0;

  friend auto operator<=>(const Fragment&, const Fragment&) = default;
};

// One mention: a label plus one or more non-overlapping fragments in
// ascending order. Two or more fragments means discontinuous.
struct Entity {
  std::string label;
  std::vector<Fragment> fragments;

  // Sorts fragments, validates them (non-empty, start < end, no overlap),
  // and returns the entity; throws Error otherwise.
  static Entity make(std::string label, std::vector<Fragment> fragments);

  bool discontinuous() const { return fragments.size() > 1; }

  // Enclosing character range [first start, last end).
  Fragment range() const { return {fragments.front().start, fragments.back().end}; }

  friend bool operator==(const Entity& a, const Entity& b) {
    return a.fragments == b.fragments && a.label == b.label;
  }
  // Canonical order: by fragments, then label.
  friend auto operator<=>(const Entity& a, const Entity& b) {
    if (auto c = a.fragments <=> b.fragments; c != 0) return c;
    return a.label <=> b.label;
  }
};

// A document with its annotations in canonical order, duplicates rejected.
struct AnnotatedDoc {
  std::string id;
  std::string dataset;
  std::string text;
  std::vector<Entity> entities;

  // Validates entity offsets against the scalar length of text, sorts
  // entities canonically, and rejects exact duplicates; throws Error.
  static AnnotatedDoc make(std::string id, std::string dataset, std::string text,
                           std::vector<Entity> entities);
};

// The twelve output formats.
enum class FormatId {
  conv_term,
  single_tag,
  multi_tag,
  single_code,
  multi_code,
  single_term,
  multi_term,
  single_span,
  multi_span,
  multi_triple,
  multi_bio,
  multi_brat,
};

inline constexpr std::array<FormatId, 12> kAllFormats = {
    FormatId::conv_term,   FormatId::single_tag, FormatId::multi_tag,
    FormatId::single_code, FormatId::multi_code, FormatId::single_term,
    FormatId::multi_term,  FormatId::single_span, FormatId::multi_span,
    FormatId::multi_triple, FormatId::multi_bio,  FormatId::multi_brat,
};

std::string_view format_name(FormatId f);
std::optional<FormatId> parse_format(std::string_view name);

// Whether a format queries one entity type per turn or all types at once.
enum class Arity { per_type, all_types };

struct FormatTraits {
  Arity arity = Arity::all_types;
  bool supports_discontinuous = true;
  bool requires_char_spans = false;  // emits character offsets in the payload
  bool conversational = false;       // multi-turn dialogue per document
};

const FormatTraits& traits_of(FormatId f);

// Structural classification of a document's entities, as index lists into
// doc.entities. Every entity lands in exactly one bucket: discontinuous
// beats nested, nested beats simple. "Nested" means the entity's character
// range intersects some other entity's range (containment or partial
// overlap alike).
struct StructureReport {
  std::vector<std::size_t> nested;
  std::vector<std::size_t> discontinuous;
  std::vector<std::size_t> simple;
};

StructureReport classify(const AnnotatedDoc& doc);

// False only when the doc has a discontinuous entity and the format cannot
// express one.
bool compatible(FormatId f, const AnnotatedDoc& doc);

// The entity's surface string: fragment slices joined by a single space.
std::string surface_of(const Entity& e, std::string_view text);

}  // namespace gner
