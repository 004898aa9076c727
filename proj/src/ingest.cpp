#include "gner/ingest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gner/text.hpp"

namespace gner {
namespace {

using json = nlohmann::ordered_json;

ParseError schema_error(const std::string& path, const std::string& what) {
  return ParseError("schema error at " + path + ": " + what);
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_ascii_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_ascii_space(line[i])) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string rstrip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool parse_size(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  out = v;
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  return std::nullopt;
}

CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats st;
  st.doc_count = c.docs.size();
  std::set<std::string> labels;
  std::size_t nested = 0, discont = 0;
  for (const auto& doc : c.docs) {
    st.entity_count += doc.entities.size();
    for (const auto& e : doc.entities) labels.insert(e.label);
    const StructureReport rep = classify(doc);
    nested += rep.nested.size();
    discont += rep.discontinuous.size();
  }
  st.labels.assign(labels.begin(), labels.end());
  st.label_count = st.labels.size();
  if (st.entity_count > 0) {
    st.nested_pct = static_cast<double>(nested) / static_cast<double>(st.entity_count);
    st.discont_pct = static_cast<double>(discont) / static_cast<double>(st.entity_count);
  }
  return st;
}

std::vector<std::string> label_inventory(const std::vector<const Corpus*>& corpora) {
  std::set<std::string> labels;
  for (const Corpus* c : corpora)
    for (const auto& doc : c->docs)
      for (const auto& e : doc.entities) labels.insert(e.label);
  return {labels.begin(), labels.end()};
}

// --- CoNLL -----------------------------------------------------------------

Corpus read_conll(std::istream& in, const std::string& name, Split split, bool strict,
                  std::vector<std::string>* warnings) {
  Corpus corpus{name, split, {}};

  std::vector<std::string> tokens;   // current sentence
  std::vector<std::string> tags;
  std::vector<std::size_t> tag_lines;

  auto flush = [&]() {
    if (tokens.empty()) return;
    std::string text;
    std::vector<std::size_t> starts(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) text += ' ';
      starts[i] = scalar_length(text);
      text += tokens[i];
    }
    std::vector<Entity> entities;
    std::string open_label;
    std::size_t open_start = 0, open_end = 0;
    auto close = [&]() {
      if (!open_label.empty()) entities.push_back(Entity::make(open_label, {{open_start, open_end}}));
      open_label.clear();
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string& tag = tags[i];
      const std::size_t tok_start = starts[i];
      const std::size_t tok_end = starts[i] + scalar_length(tokens[i]);
      if (tag == "O") {
        close();
      } else {
        const char head = tag[0];
        const std::string label = tag.substr(2);
        bool begin = head == 'B';
        if (head == 'I' && label != open_label) {
          const std::string msg = "line " + std::to_string(tag_lines[i]) + ": orphan tag I-" +
                                  label + " (no open " + label + " run); treating as B-" + label;
          if (strict) throw ParseError(msg);
          if (warnings) warnings->push_back(msg);
          begin = true;
        }
        if (begin) {
          close();
          open_label = label;
          open_start = tok_start;
        }
        open_end = tok_end;
      }
    }
    close();
    const std::string id = "s" + std::to_string(corpus.docs.size());
    corpus.docs.push_back(AnnotatedDoc::make(id, name, std::move(text), std::move(entities)));
    tokens.clear();
    tags.clear();
    tag_lines.clear();
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = rstrip_cr(raw);
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    const std::vector<std::string> fields = split_ws(line);
    if (fields.size() < 2)
      throw ParseError("line " + std::to_string(line_no) + ": expected 'token tag', got '" + line + "'");
    const std::string& tag = fields.back();
    const bool bio = tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
    if (tag != "O" && !bio)
      throw ParseError("line " + std::to_string(line_no) + ": malformed tag '" + tag + "'");
    tokens.push_back(fields.front());
    tags.push_back(tag);
    tag_lines.push_back(line_no);
  }
  flush();
  return corpus;
}

void write_conll(const Corpus& c, std::ostream& out) {
  for (const auto& doc : c.docs) {
    const TextIndex idx(doc.text);
    const std::vector<TokenSpan> toks = idx.tokens();
    std::string rebuilt;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) rebuilt += ' ';
      rebuilt += idx.slice(toks[i].start, toks[i].end);
    }
    if (rebuilt != doc.text)
      throw Error("doc " + doc.id + ": text is not single-space tokenized");

    std::vector<std::string> tags(toks.size(), "O");
    for (const auto& e : doc.entities) {
      if (e.discontinuous()) throw Error("doc " + doc.id + ": discontinuous entity '" + e.label + "'");
      const Fragment f = e.fragments.front();
      std::size_t first = toks.size(), last = toks.size();
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].start == f.start) first = i;
        if (toks[i].end == f.end) last = i;
      }
      if (first >= toks.size() || last >= toks.size() || first > last)
        throw Error("doc " + doc.id + ": entity '" + e.label + "' at [" + std::to_string(f.start) +
                    "," + std::to_string(f.end) + ") is not token-aligned");
      for (std::size_t i = first; i <= last; ++i) {
        if (tags[i] != "O")
          throw Error("doc " + doc.id + ": overlapping entities at token " + std::to_string(i));
        tags[i] = (i == first ? "B-" : "I-") + e.label;
      }
    }
    for (std::size_t i = 0; i < toks.size(); ++i)
      out << idx.slice(toks[i].start, toks[i].end) << '\t' << tags[i] << '\n';
    out << '\n';
  }
}

// --- brat -------------------------------------------------------------------

AnnotatedDoc read_brat(const std::string& id, const std::string& dataset,
                       const std::string& text, const std::string& ann) {
  const TextIndex idx(text);
  std::vector<Entity> entities;

  std::istringstream in(ann);
  std::string raw;
  while (std::getline(in, raw)) {
    const std::string line = rstrip_cr(raw);
    if (line.empty()) continue;
    if (line[0] != 'T') continue;  // relations, attributes, notes: ignored

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (fields.size() < 2) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    fields.push_back(line.substr(pos));
    if (fields.size() < 3)
      throw ParseError("brat line '" + line.substr(0, 40) + "': expected id, span, surface fields");
    const std::string& tid = fields[0];
    const std::string& surface = fields[2];

    // Span field: "TYPE s e[;s e]*".
    const std::string& span_field = fields[1];
    const std::size_t type_end = span_field.find(' ');
    if (type_end == std::string::npos)
      throw ParseError(tid + ": malformed span field '" + span_field + "'");
    const std::string label = span_field.substr(0, type_end);
    std::vector<Fragment> frags;
    std::string rest = span_field.substr(type_end + 1);
    std::size_t piece_start = 0;
    while (piece_start <= rest.size()) {
      std::size_t semi = rest.find(';', piece_start);
      if (semi == std::string::npos) semi = rest.size();
      const std::vector<std::string> nums = split_ws(std::string_view(rest).substr(piece_start, semi - piece_start));
      std::size_t s = 0, e = 0;
      if (nums.size() != 2 || !parse_size(nums[0], s) || !parse_size(nums[1], e))
        throw ParseError(tid + ": malformed offsets in '" + span_field + "'");
      frags.push_back({s, e});
      if (semi == rest.size()) break;
      piece_start = semi + 1;
    }
    Entity entity = [&] {
      try {
        return Entity::make(label, std::move(frags));
      } catch (const Error& err) {
        throw ParseError(tid + ": " + err.what());
      }
    }();
    if (entity.fragments.back().end > idx.scalars())
      throw ParseError(tid + ": offset " + std::to_string(entity.fragments.back().end) +
                       " past end of text (" + std::to_string(idx.scalars()) + ")");
    const std::string expect = surface_of(entity, text);
    if (expect != surface)
      throw ParseError(tid + ": stated surface '" + surface + "' does not match text slice '" +
                       expect + "'");
    entities.push_back(std::move(entity));
  }
  try {
    return AnnotatedDoc::make(id, dataset, text, std::move(entities));
  } catch (const Error& err) {
    throw ParseError(err.what());
  }
}

std::string write_brat_ann(const AnnotatedDoc& doc) {
  std::string out;
  std::size_t n = 0;
  for (const auto& e : doc.entities) {
    out += "T" + std::to_string(++n) + "\t" + e.label;
    for (std::size_t i = 0; i < e.fragments.size(); ++i) {
      out += i ? ";" : " ";
      out += std::to_string(e.fragments[i].start) + " " + std::to_string(e.fragments[i].end);
    }
    out += "\t" + surface_of(e, doc.text) + "\n";
  }
  return out;
}

Corpus read_brat_dir(const std::string& dir, const std::string& name, Split split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".txt") stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  Corpus corpus{name, split, {}};
  for (const auto& stem : stems) {
    const std::string txt_path = (fs::path(dir) / (stem + ".txt")).string();
    const std::string ann_path = (fs::path(dir) / (stem + ".ann")).string();
    corpus.docs.push_back(read_brat(stem, name, slurp(txt_path), slurp(ann_path)));
  }
  return corpus;
}

// --- canonical JSON -----------------------------------------------------------

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw schema_error(path + "." + key, "missing field");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw schema_error(path + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace

Corpus read_corpus_json(std::istream& in, const std::string& source_name) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(source_name + ": invalid JSON: " + e.what());
  }

  Corpus corpus;
  corpus.name = require_string(root, "name", "$");
  const std::string split = require_string(root, "split", "$");
  const auto sp = parse_split(split);
  if (!sp) throw schema_error("$.split", "expected train|dev|test, got '" + split + "'");
  corpus.split = *sp;

  const json& docs = require(root, "docs", "$");
  if (!docs.is_array()) throw schema_error("$.docs", "expected an array");
  std::set<std::string> seen_ids;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::string dpath = "$.docs[" + std::to_string(d) + "]";
    const json& jd = docs[d];
    const std::string id = require_string(jd, "id", dpath);
    const std::string dataset = require_string(jd, "dataset", dpath);
    const std::string text = require_string(jd, "text", dpath);
    if (!seen_ids.insert(id).second) throw schema_error(dpath + ".id", "duplicate doc id '" + id + "'");

    const json& ents = require(jd, "entities", dpath);
    if (!ents.is_array()) throw schema_error(dpath + ".entities", "expected an array");
    std::vector<Entity> entities;
    for (std::size_t i = 0; i < ents.size(); ++i) {
      const std::string epath = dpath + ".entities[" + std::to_string(i) + "]";
      const json& je = ents[i];
      const std::string label = require_string(je, "label", epath);
      const json& frags = require(je, "fragments", epath);
      if (!frags.is_array() || frags.empty())
        throw schema_error(epath + ".fragments", "expected a non-empty array");
      std::vector<Fragment> fs;
      for (std::size_t k = 0; k < frags.size(); ++k) {
        const std::string fpath = epath + ".fragments[" + std::to_string(k) + "]";
        const json& jf = frags[k];
        if (!jf.is_array() || jf.size() != 2 || !jf[0].is_number_unsigned() ||
            !jf[1].is_number_unsigned())
          throw schema_error(fpath, "expected [start, end] with non-negative integers");
        fs.push_back({jf[0].get<std::size_t>(), jf[1].get<std::size_t>()});
      }
      try {
        entities.push_back(Entity::make(label, std::move(fs)));
      } catch (const Error& err) {
        throw schema_error(epath, err.what());
      }
    }
    try {
      corpus.docs.push_back(AnnotatedDoc::make(id, dataset, text, std::move(entities)));
    } catch (const Error& err) {
      throw schema_error(dpath, err.what());
    }
  }
  return corpus;
}

void write_corpus_json(const Corpus& c, std::ostream& out) {
  json root;
  root["name"] = c.name;
  root["split"] = std::string(split_name(c.split));
  json docs = json::array();
  for (const auto& doc : c.docs) {
    json jd;
    jd["id"] = doc.id;
    jd["dataset"] = doc.dataset;
    jd["text"] = doc.text;
    json ents = json::array();
    for (const auto& e : doc.entities) {
      json je;
      je["label"] = e.label;
      json frags = json::array();
      for (const auto& f : e.fragments) frags.push_back(json::array({f.start, f.end}));
      je["fragments"] = std::move(frags);
      ents.push_back(std::move(je));
    }
    jd["entities"] = std::move(ents);
    docs.push_back(std::move(jd));
  }
  root["docs"] = std::move(docs);
  out << root.dump(2) << '\n';
}

Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_corpus_json(in, path);
}

void save_corpus_file(const Corpus& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_corpus_json(c, out);
}

}  // namespace gner
