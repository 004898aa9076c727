#pragma once

// Output-format codecs: prompt rendering, gold-target emission for all
// twelve formats, lenient decoding of model output back into entities, and
// span-shift detection.

#include <optional>
#include <string>
#include <vector>

#include "gner/core.hpp"

namespace gner {

// One assistant payload; queried_type is set for per-type formats.
struct Turn {
  std::optional<std::string> queried_type;
  std::string payload;
};

// The gold assistant output(s) for one (doc, format) pair: a single turn
// for all-types formats, one turn per inventory type otherwise.
struct EncodedTarget {
  FormatId format = FormatId::multi_term;
  std::vector<Turn> turns;
};

enum class DiagKind {
  MALFORMED_STRUCTURE,
  UNGROUNDED_SURFACE,
  OUT_OF_BOUNDS_SPAN,
  UNKNOWN_TYPE,
  LAYER_MISMATCH,
  DUPLICATE,
  SPAN_SHIFT_SUSPECTED,
};

std::string_view diag_kind_name(DiagKind k);

struct Diagnostic {
  DiagKind kind = DiagKind::MALFORMED_STRUCTURE;
  std::string message;
  std::string location;  // free-form: item index, line, or offset context
};

// Lenient decode result: everything recoverable, plus one diagnostic per
// skipped or repaired construct. Decoding never throws on bad payloads.
struct ParseResult {
  std::vector<Entity> entities;
  std::vector<Diagnostic> diagnostics;
};

// Instruction text shown to the model for one (doc, format) pair. The
// inventory lists the dataset's entity types in presentation order.
std::string render_prompt(const AnnotatedDoc& doc, FormatId f,
                          const std::vector<std::string>& inventory);

// Gold target emission. Requires compatible(f, doc); throws Error otherwise.
EncodedTarget encode(const AnnotatedDoc& doc, FormatId f,
                     const std::vector<std::string>& inventory);

// Parses one assistant payload against the source text. queried_type must
// be set for per-type formats and empty for all-types formats.
ParseResult decode(const std::string& output, const std::string& text, FormatId f,
                   const std::optional<std::string>& queried_type,
                   const std::vector<std::string>& inventory);

// If candidate looks like reference displaced by a small constant (equal
// span length, start delta within ±8, in bounds), returns that delta.
std::optional<int> detect_span_shift(const Entity& reference, const Fragment& candidate,
                                     std::string_view text);

// Entity presentation order used by list-style payloads: surface ascending,
// ASCII case-insensitive, ties by byte compare, then range start, then
// label. Returns indices into `entities`.
std::vector<std::size_t> listing_order(const std::vector<Entity>& entities,
                                       std::string_view text);

}  // namespace gner
