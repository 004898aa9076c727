#pragma once

// Instruction-tuning dataset construction: deterministic sampling, format
// assignment, per-dataset record caps, multi-draw sampling, and JSONL
// serialization of chat records.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gner/codecs.hpp"
#include "gner/core.hpp"
#include "gner/ingest.hpp"

namespace gner {

// Which formats participate in a build.
enum class BuildMode { all, seven_best, term_ner, only };

std::string_view build_mode_name(BuildMode m);

// Accepts "all", "7best", "term_ner", or "only:<format>".
struct ModeSpec {
  BuildMode mode = BuildMode::all;
  std::optional<FormatId> only_format;
};
std::optional<ModeSpec> parse_mode(std::string_view s);

std::vector<FormatId> format_set(const ModeSpec& spec);

struct SplitCaps {
  std::size_t train = 10000;
  std::size_t dev = 200;
  std::size_t test = 300;

  std::size_t of(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::dev: return dev;
      case Split::test: return test;
    }
    return 0;
  }
};

struct BuildConfig {
  ModeSpec mode;
  std::uint64_t seed = 0;
  SplitCaps caps;
  std::size_t draws = 1;
  std::vector<Corpus> corpora;
};

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::string content;
};

struct InstructionRecord {
  std::vector<ChatMessage> messages;
  std::string dataset;
  FormatId format = FormatId::multi_term;
  std::vector<std::string> types;  // queried type(s)
  std::string doc_id;
};

struct BuildOutput {
  std::vector<InstructionRecord> records;
  std::vector<std::string> warnings;  // excluded docs etc.
};

// Builds one split of one draw. Training and dev assign each sampled doc one
// uniformly chosen compatible format; test expands every (doc, format) pair.
// Per-dataset record counts never exceed the split cap. Throws Error when
// the result would be empty.
BuildOutput build_split(const BuildConfig& config, Split split, std::uint64_t draw = 0);

// n independent draws of {train, dev, test}.
std::vector<std::array<BuildOutput, 3>> draw_samples(const BuildConfig& config,
                                                     std::size_t n_draws);

// One record per line:
// {"messages": [...], "dataset": ..., "format": ..., "types": [...], "doc_id": ...}
void write_records_jsonl(const std::vector<InstructionRecord>& records, std::ostream& out);

// Chat messages for one (doc, format) record. Exposed for tests.
std::vector<ChatMessage> record_messages(const AnnotatedDoc& doc, FormatId format,
                                         const std::vector<std::string>& inventory,
                                         const std::optional<std::string>& queried_type);

}  // namespace gner
