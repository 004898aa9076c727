#pragma once

// Failure-mode diagnostics: span-shift histograms over model outputs, and
// mechanical output corruption for robustness curves.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gner/codecs.hpp"
#include "gner/core.hpp"
#include "gner/eval.hpp"
#include "gner/ingest.hpp"

namespace gner {

// One raw model output: per-type formats carry the queried type.
struct RawOutput {
  std::string doc_id;
  std::optional<std::string> type;
  std::string output;
};

// Distribution of start-offset displacements k in [-8, 8] between predicted
// spans and unconsumed same-label, same-length gold spans. Exact matches
// land in bucket 0; predictions pairing with nothing become ungrounded.
struct ShiftHistogram {
  std::map<int, std::size_t> counts;
  std::size_t total_candidates = 0;
  std::size_t ungrounded_count = 0;
};

// Requires a span-bearing format (offsets in the payload); throws otherwise.
ShiftHistogram shift_profile(const Corpus& gold, const std::vector<RawOutput>& outputs,
                             FormatId format, const std::vector<std::string>& inventory);

// Mechanical corruption knobs. Each mention decides each knob by a uniform
// draw keyed on (seed, doc, mention, knob) alone, so decisions are coupled
// across different probability values: raising drop_probability only ever
// drops more.
struct CorruptionSpec {
  double shift_probability = 0.0;
  int shift_min = 0;  // displacement magnitude range, inclusive
  int shift_max = 0;
  double drop_probability = 0.0;
  double spurious_probability = 0.0;
  double structural_noise_probability = 0.0;
  std::uint64_t seed = 0;
};

// Re-encodes the doc's gold target with mention-level corruption applied.
// All-zero probabilities return the target byte-identical.
EncodedTarget corrupt(const EncodedTarget& target, const CorruptionSpec& spec,
                      const AnnotatedDoc& doc, const std::vector<std::string>& inventory);

struct CurvePoint {
  CorruptionSpec spec;
  MatchCounts counts;
  Prf scores;
};

// Encode -> corrupt -> decode -> score over the corpus for each spec.
// Docs incompatible with the format are skipped.
std::vector<CurvePoint> robustness_curve(const Corpus& corpus, FormatId format,
                                         const std::vector<CorruptionSpec>& grid);

std::string curve_csv(const std::vector<CurvePoint>& points);

}  // namespace gner
