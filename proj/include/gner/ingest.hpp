#pragma once

// Corpus ingestion and serialization: CoNLL token/tag files, brat
// standoff pairs, and the canonical JSON corpus format.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gner/core.hpp"

namespace gner {

enum class Split { train, dev, test };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct Corpus {
  std::string name;
  Split split = Split::train;
  std::vector<AnnotatedDoc> docs;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  std::size_t entity_count = 0;
  std::size_t label_count = 0;
  std::vector<std::string> labels;  // distinct, ascending
  double nested_pct = 0.0;          // fraction of entities classified nested
  double discont_pct = 0.0;         // fraction of entities classified discontinuous
};

CorpusStats corpus_stats(const Corpus& c);

// Distinct labels across the given corpora, ascending.
std::vector<std::string> label_inventory(const std::vector<const Corpus*>& corpora);

// --- CoNLL token/tag format ---------------------------------------------
//
// One token and its BIO tag per line, blank line between sentences. Each
// sentence becomes one doc whose text is the tokens joined by single
// spaces. An orphan I-X (no preceding B-X/I-X of the same type) is repaired
// to B-X with a warning, or rejected when strict. A malformed tag is a
// ParseError naming the 1-based line number.
Corpus read_conll(std::istream& in, const std::string& name, Split split, bool strict,
                  std::vector<std::string>* warnings);

// Writes docs as CoNLL. Requires every doc to be expressible: entities
// token-aligned, contiguous, and non-overlapping; throws Error otherwise.
void write_conll(const Corpus& c, std::ostream& out);

// --- brat standoff --------------------------------------------------------
//
// Builds one doc from a text and its .ann content. T lines look like
//   T1<TAB>TYPE 48 69[;s e]*<TAB>surface
// The stated surface must equal the fragment slices joined by single
// spaces; a mismatch is an Error naming the T id. Non-T lines are ignored.
AnnotatedDoc read_brat(const std::string& id, const std::string& dataset,
                       const std::string& text, const std::string& ann);

// Renders a doc's entities as brat T lines (canonical entity order).
std::string write_brat_ann(const AnnotatedDoc& doc);

// --- canonical JSON corpus ------------------------------------------------
//
// {"name": ..., "split": ..., "docs": [{"id", "dataset", "text",
//  "entities": [{"label", "fragments": [[s,e],...]}]}]}
// Schema violations raise ParseError with a JSON path like $.docs[3].text.
Corpus read_corpus_json(std::istream& in, const std::string& source_name);
void write_corpus_json(const Corpus& c, std::ostream& out);

Corpus load_corpus_file(const std::string& path);              // canonical JSON
void save_corpus_file(const Corpus& c, const std::string& path);

// Reads a brat directory (paired <stem>.txt / <stem>.ann files, doc id =
// stem, sorted by stem) into a corpus.
Corpus read_brat_dir(const std::string& dir, const std::string& name, Split split);

}  // namespace gner
