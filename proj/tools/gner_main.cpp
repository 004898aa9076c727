// gner — command-line toolkit for generative-NER corpora: format encoding
// and decoding, instruction-dataset construction, strict evaluation, and
// output diagnostics. Logs go to stderr; data goes to files or stdout. Every
// file artifact gets a run manifest written atomically next to it.
//
// Exit codes: 0 success, 1 data error (bad files, bad annotations),
// 2 usage error (bad flags, unusable command for the given format).

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gner/codecs.hpp"
#include "gner/core.hpp"
#include "gner/dataset.hpp"
#include "gner/diagnose.hpp"
#include "gner/eval.hpp"
#include "gner/ingest.hpp"
#include "gner/text.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// A problem with how the tool was invoked (exit 2), as opposed to a problem
// with the data it was pointed at (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small utilities

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes via a temp file in the same directory plus a rename, so readers
// never observe a half-written artifact.
void atomic_write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw gner::Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw gner::Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string quote_arg(const std::string& a) {
  if (a.find_first_of(" \t\"'") == std::string::npos && !a.empty()) return a;
  std::string out = "\"";
  for (char c : a) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

// What one invocation did: recorded next to each output artifact.
struct RunInfo {
  std::string command;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
};

void write_manifest(const fs::path& manifest_path, const RunInfo& info) {
  ordered_json j;
  j["command"] = info.command;
  j["config_path"] = info.config_path ? ordered_json(*info.config_path) : ordered_json(nullptr);
  j["seed"] = info.seed ? ordered_json(*info.seed) : ordered_json(nullptr);
  j["inputs"] = info.inputs;
  j["outputs"] = info.outputs;
  j["tool_version"] = std::string(kVersion);
  j["started_at"] = info.started_at;
  j["finished_at"] = now_iso8601();
  atomic_write_file(manifest_path, j.dump(2) + "\n");
}

// Emits `content` to the --out file (with a manifest next to it) or to
// stdout when no --out was given.
void emit_artifact(const std::string& out_path, const std::string& content, RunInfo& info) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  atomic_write_file(out_path, content);
  info.outputs.push_back(out_path);
  write_manifest(out_path + ".manifest.json", info);
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Shared parsing helpers

gner::FormatId require_format(const std::string& name) {
  if (auto f = gner::parse_format(name)) return *f;
  throw UsageError("unknown format name '" + name + "'");
}

gner::Split require_split(const std::string& name) {
  if (auto s = gner::parse_split(name)) return *s;
  throw UsageError("unknown split '" + name + "' (expected train, dev, or test)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gner::Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Loads a corpus from a canonical JSON file, a .conll file, or a brat
// directory (detected by path shape). Name/split override the stored or
// derived values when provided.
gner::Corpus load_any_corpus(const std::string& path, const std::optional<std::string>& name,
                             const std::optional<gner::Split>& split, bool strict_conll = false) {
  const fs::path p(path);
  const std::string nm = name.value_or(p.stem().string());
  const gner::Split sp = split.value_or(gner::Split::train);
  if (fs::is_directory(p)) return gner::read_brat_dir(path, nm, sp);
  if (p.extension() == ".conll") {
    std::ifstream in(p);
    if (!in) throw gner::Error("cannot open " + path);
    std::vector<std::string> warnings;
    gner::Corpus c = gner::read_conll(in, nm, sp, strict_conll, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << path << ": " << w << '\n';
    return c;
  }
  gner::Corpus c = gner::load_corpus_file(path);
  if (name) c.name = *name;
  if (split) c.split = *split;
  return c;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ordered_json entity_to_json(const gner::Entity& e) {
  ordered_json frags = ordered_json::array();
  for (const auto& f : e.fragments) frags.push_back({f.start, f.end});
  return ordered_json{{"label", e.label}, {"fragments", frags}};
}

// One raw model output per line: {"doc_id": ..., "type": ..., "output": ...}.
std::vector<gner::RawOutput> read_outputs_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gner::Error("cannot open " + path);
  std::vector<gner::RawOutput> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      throw gner::ParseError(path + ":" + std::to_string(line_no) + ": not a JSON object: " +
                             e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string() ||
        !j.contains("output") || !j["output"].is_string())
      throw gner::ParseError(path + ":" + std::to_string(line_no) +
                             ": expected {\"doc_id\": str, \"output\": str, \"type\"?: str}");
    gner::RawOutput r;
    r.doc_id = j["doc_id"].get<std::string>();
    r.output = j["output"].get<std::string>();
    if (j.contains("type") && j["type"].is_string()) r.type = j["type"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOpts {
  std::string corpus;
  std::string format;
  std::string types;
  std::string out;
  unsigned jobs = 1;
};

int run_encode(const EncodeOpts& o, RunInfo info) {
  const gner::FormatId f = require_format(o.format);
  info.inputs.push_back(o.corpus);
  const gner::Corpus corpus = load_any_corpus(o.corpus, std::nullopt, std::nullopt);
  std::vector<std::string> inventory =
      o.types.empty() ? gner::label_inventory({&corpus}) : split_csv(o.types);
  if (inventory.empty())
    std::cerr << "warning: empty type inventory (corpus has no entities and no --types given)\n";

  std::vector<std::string> lines(corpus.docs.size());
  std::atomic<std::size_t> skipped{0};
  parallel_for(corpus.docs.size(), o.jobs, [&](std::size_t i) {
    const gner::AnnotatedDoc& doc = corpus.docs[i];
    if (!gner::compatible(f, doc)) {
      ++skipped;
      return;
    }
    const gner::EncodedTarget target = gner::encode(doc, f, inventory);
    ordered_json turns = ordered_json::array();
    for (const auto& t : target.turns)
      turns.push_back(
          {{"type", t.queried_type ? ordered_json(*t.queried_type) : ordered_json(nullptr)},
           {"payload", t.payload}});
    ordered_json j{{"doc_id", doc.id}, {"format", std::string(gner::format_name(f))},
                   {"turns", turns}};
    lines[i] = j.dump() + "\n";
  });

  std::string body;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() && i < corpus.docs.size() &&
        !gner::compatible(f, corpus.docs[i]))
      std::cerr << "skipping doc " << corpus.docs[i].id << ": incompatible with " << o.format
                << "\n";
    body += lines[i];
  }
  if (corpus.docs.empty()) std::cerr << "warning: no documents encoded (empty corpus)\n";
  emit_artifact(o.out, body, info);
  return 0;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeOpts {
  std::string outputs;
  std::string corpus;
  std::string format;
  std::string out;
  unsigned jobs = 1;
};

int run_decode(const DecodeOpts& o, RunInfo info) {
  const gner::FormatId f = require_format(o.format);
  info.inputs = {o.outputs, o.corpus};
  const gner::Corpus corpus = load_any_corpus(o.corpus, std::nullopt, std::nullopt);
  std::map<std::string, const gner::AnnotatedDoc*> by_id;
  for (const auto& d : corpus.docs) by_id[d.id] = &d;
  const std::vector<std::string> inventory = gner::label_inventory({&corpus});

  const std::vector<gner::RawOutput> raw = read_outputs_jsonl(o.outputs);
  for (const auto& r : raw)
    if (!by_id.count(r.doc_id))
      throw gner::Error("output references unknown doc id '" + r.doc_id + "'");

  std::vector<std::string> lines(raw.size());
  std::vector<std::map<gner::DiagKind, std::size_t>> tallies(raw.size());
  parallel_for(raw.size(), o.jobs, [&](std::size_t i) {
    const gner::RawOutput& r = raw[i];
    const gner::AnnotatedDoc& doc = *by_id.at(r.doc_id);
    const gner::ParseResult res = gner::decode(r.output, doc.text, f, r.type, inventory);
    ordered_json ents = ordered_json::array();
    for (const auto& e : res.entities) ents.push_back(entity_to_json(e));
    ordered_json diags = ordered_json::array();
    for (const auto& d : res.diagnostics) {
      tallies[i][d.kind]++;
      diags.push_back({{"kind", std::string(gner::diag_kind_name(d.kind))},
                       {"message", d.message},
                       {"location", d.location}});
    }
    ordered_json j{{"doc_id", r.doc_id},
                   {"type", r.type ? ordered_json(*r.type) : ordered_json(nullptr)},
                   {"entities", ents},
                   {"diagnostics", diags}};
    lines[i] = j.dump() + "\n";
  });

  std::string body;
  for (const auto& l : lines) body += l;
  std::map<gner::DiagKind, std::size_t> tally;
  for (const auto& t : tallies)
    for (const auto& [k, n] : t) tally[k] += n;
  if (!tally.empty()) {
    std::cerr << "diagnostics:";
    for (const auto& [k, n] : tally) std::cerr << ' ' << gner::diag_kind_name(k) << '=' << n;
    std::cerr << '\n';
  }
  emit_artifact(o.out, body, info);
  return 0;
}

// ---------------------------------------------------------------------------
// build-dataset

struct BuildOpts {
  std::string config;
  std::string out_dir;   // override
  std::int64_t seed = -1;  // override when >= 0
  int draws = -1;          // override when >= 0
};

int run_build_dataset(const BuildOpts& o, RunInfo info) {
  info.config_path = o.config;
  info.inputs.push_back(o.config);
  ordered_json cfg;
  try {
    cfg = ordered_json::parse(read_file(o.config));
  } catch (const ordered_json::exception& e) {
    throw gner::ParseError(o.config + ": invalid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw gner::ParseError(o.config + ": config must be a JSON object");

  gner::BuildConfig bc;
  const std::string mode_str = cfg.value("mode", std::string("all"));
  if (auto m = gner::parse_mode(mode_str))
    bc.mode = *m;
  else
    throw gner::ParseError(o.config + ": unknown mode '" + mode_str +
                           "' (expected all, 7best, term_ner, or only:<format>)");
  bc.seed = cfg.value("seed", std::uint64_t{0});
  if (o.seed >= 0) bc.seed = static_cast<std::uint64_t>(o.seed);
  std::size_t draws = cfg.value("draws", std::size_t{3});
  if (o.draws >= 0) draws = static_cast<std::size_t>(o.draws);
  if (draws == 0) throw UsageError("--draws must be at least 1");
  if (cfg.contains("caps")) {
    const auto& caps = cfg["caps"];
    if (!caps.is_object()) throw gner::ParseError(o.config + ": \"caps\" must be an object");
    bc.caps.train = caps.value("train", bc.caps.train);
    bc.caps.dev = caps.value("dev", bc.caps.dev);
    bc.caps.test = caps.value("test", bc.caps.test);
  }
  std::string out_dir = o.out_dir.empty() ? cfg.value("out_dir", std::string()) : o.out_dir;
  if (out_dir.empty())
    throw UsageError("no output directory: set \"out_dir\" in the config or pass --out-dir");

  if (!cfg.contains("corpora") || !cfg["corpora"].is_array() || cfg["corpora"].empty())
    throw gner::ParseError(o.config + ": \"corpora\" must be a non-empty array");
  const fs::path cfg_dir = fs::path(o.config).parent_path();
  for (const auto& entry : cfg["corpora"]) {
    std::string path;
    std::optional<std::string> name;
    std::optional<gner::Split> split;
    if (entry.is_string()) {
      path = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("path") && entry["path"].is_string()) {
      path = entry["path"].get<std::string>();
      if (entry.contains("name") && entry["name"].is_string())
        name = entry["name"].get<std::string>();
      if (entry.contains("split") && entry["split"].is_string())
        split = require_split(entry["split"].get<std::string>());
    } else {
      throw gner::ParseError(o.config +
                             ": corpora entries must be path strings or {path, name?, split?}");
    }
    fs::path p(path);
    if (p.is_relative()) p = cfg_dir / p;  // paths resolve relative to the config file
    info.inputs.push_back(p.string());
    bc.corpora.push_back(load_any_corpus(p.string(), name, split));
  }
  bc.draws = draws;
  info.seed = bc.seed;

  const auto samples = gner::draw_samples(bc, draws);
  static constexpr std::array<gner::Split, 3> kSplits = {gner::Split::train, gner::Split::dev,
                                                         gner::Split::test};
  for (std::size_t d = 0; d < samples.size(); ++d) {
    for (std::size_t s = 0; s < kSplits.size(); ++s) {
      const gner::BuildOutput& built = samples[d][s];
      for (const auto& w : built.warnings)
        std::cerr << "warning: draw " << (d + 1) << ' ' << gner::split_name(kSplits[s]) << ": "
                  << w << '\n';
      std::ostringstream body;
      gner::write_records_jsonl(built.records, body);
      const fs::path out_path = fs::path(out_dir) / ("draw" + std::to_string(d + 1)) /
                                (std::string(gner::split_name(kSplits[s])) + ".jsonl");
      atomic_write_file(out_path, body.str());
      info.outputs.push_back(out_path.string());
      std::cerr << "wrote " << out_path.string() << " (" << built.records.size()
                << " records)\n";
    }
  }
  write_manifest(fs::path(out_dir) / "manifest.json", info);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
  std::string gold;
  std::vector<std::string> preds;
  std::string mode = "span_strict";
  bool complex_report = false;
  std::string out;
};

// Predictions are either a corpus file or a decode-results JSONL (detected
// by the first line being a JSON object with a "doc_id" field).
std::map<std::string, std::vector<gner::Entity>> load_predictions(const std::string& path) {
  std::map<std::string, std::vector<gner::Entity>> out;
  bool jsonl = false;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in && !fs::is_directory(path)) throw gner::Error("cannot open " + path);
    std::string first;
    if (in && std::getline(in, first)) {
      const auto j = ordered_json::parse(first, nullptr, false);
      jsonl = j.is_object() && j.contains("doc_id");
    }
  }
  if (!jsonl) {
    const gner::Corpus c = load_any_corpus(path, std::nullopt, std::nullopt);
    for (const auto& d : c.docs) out[d.id] = d.entities;
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      throw gner::ParseError(ctx + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string())
      throw gner::ParseError(ctx + ": expected an object with a \"doc_id\" field");
    auto& ents = out[j["doc_id"].get<std::string>()];
    if (!j.contains("entities")) continue;
    if (!j["entities"].is_array()) throw gner::ParseError(ctx + ": \"entities\" must be an array");
    for (const auto& ej : j["entities"]) {
      if (!ej.is_object() || !ej.contains("label") || !ej["label"].is_string() ||
          !ej.contains("fragments") || !ej["fragments"].is_array())
        throw gner::ParseError(ctx + ": entities need {label: str, fragments: [[s,e],...]}");
      std::vector<gner::Fragment> frags;
      for (const auto& fj : ej["fragments"]) {
        if (!fj.is_array() || fj.size() != 2 || !fj[0].is_number_unsigned() ||
            !fj[1].is_number_unsigned())
          throw gner::ParseError(ctx + ": fragments must be [start, end] pairs");
        frags.push_back({fj[0].get<std::size_t>(), fj[1].get<std::size_t>()});
      }
      gner::Entity e;
      try {
        e = gner::Entity::make(ej["label"].get<std::string>(), std::move(frags));
      } catch (const gner::Error& err) {
        throw gner::ParseError(ctx + ": " + err.what());
      }
      if (std::find(ents.begin(), ents.end(), e) == ents.end()) ents.push_back(std::move(e));
    }
  }
  return out;
}

ordered_json counts_json(const gner::MatchCounts& c) {
  return ordered_json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

ordered_json row_json(const gner::MetricRow& row) {
  return ordered_json{{"counts", counts_json(row.counts)},
                      {"precision", row.scores.precision},
                      {"recall", row.scores.recall},
                      {"f1", row.scores.f1}};
}

int run_evaluate(const EvaluateOpts& o, RunInfo info) {
  const auto mode = gner::parse_match_mode(o.mode);
  if (!mode) throw UsageError("unknown match mode '" + o.mode + "'");
  info.inputs.push_back(o.gold);
  for (const auto& p : o.preds) info.inputs.push_back(p);
  const gner::Corpus gold = load_any_corpus(o.gold, std::nullopt, std::nullopt);
  std::map<std::string, const gner::AnnotatedDoc*> gold_by_id;
  for (const auto& d : gold.docs) gold_by_id[d.id] = &d;

  std::vector<gner::EvalReport> reports;
  std::vector<std::map<std::string, std::vector<gner::Entity>>> pred_maps;
  for (const auto& path : o.preds) {
    auto preds = load_predictions(path);
    for (const auto& [id, ents] : preds)
      if (!gold_by_id.count(id))
        throw gner::Error(path + ": predictions reference unknown doc id '" + id + "'");
    gner::MatchCounts overall;
    std::map<std::string, gner::MatchCounts> by_key;
    static const std::vector<gner::Entity> kNone;
    for (const auto& doc : gold.docs) {
      auto it = preds.find(doc.id);
      const auto& pred_ents = it == preds.end() ? kNone : it->second;
      const gner::MatchCounts c =
          gner::match_entities(doc.entities, pred_ents, doc.text, *mode);
      overall += c;
      by_key[doc.dataset.empty() ? gold.name : doc.dataset] += c;
    }
    reports.push_back(gner::make_report(overall, by_key));
    pred_maps.push_back(std::move(preds));
  }

  ordered_json out_json;
  out_json["mode"] = std::string(gner::match_mode_name(*mode));
  std::string table;
  if (reports.size() == 1) {
    const gner::EvalReport& r = reports[0];
    out_json["counts"] = counts_json(r.overall.counts);
    out_json["precision"] = r.overall.scores.precision;
    out_json["recall"] = r.overall.scores.recall;
    out_json["f1"] = r.overall.scores.f1;
    ordered_json by_key = ordered_json::object();
    for (const auto& [k, row] : r.by_key) by_key[k] = row_json(row);
    out_json["by_key"] = by_key;
    table = gner::render_table(r);
  } else {
    ordered_json runs = ordered_json::array();
    for (const auto& r : reports) {
      ordered_json rj;
      rj["counts"] = counts_json(r.overall.counts);
      rj["precision"] = r.overall.scores.precision;
      rj["recall"] = r.overall.scores.recall;
      rj["f1"] = r.overall.scores.f1;
      ordered_json by_key = ordered_json::object();
      for (const auto& [k, row] : r.by_key) by_key[k] = row_json(row);
      rj["by_key"] = by_key;
      runs.push_back(rj);
    }
    out_json["runs"] = runs;
    const gner::AggregateReport agg = gner::aggregate_reports(reports);
    auto stat_json = [](const gner::AggregateStat& s) {
      return ordered_json{{"mean", s.mean}, {"std", s.stddev}};
    };
    auto prf_json = [&](const gner::AggregatePrf& p) {
      return ordered_json{{"precision", stat_json(p.precision)},
                          {"recall", stat_json(p.recall)},
                          {"f1", stat_json(p.f1)}};
    };
    ordered_json agg_json = prf_json(agg.overall);
    ordered_json agg_by_key = ordered_json::object();
    for (const auto& [k, p] : agg.by_key) agg_by_key[k] = prf_json(p);
    agg_json["by_key"] = agg_by_key;
    out_json["aggregate"] = agg_json;
    table = gner::render_aggregate_table(agg);
  }

  if (o.complex_report) {
    // Structural-subset scoring is span-exact by definition; the first
    // prediction set feeds it (subsequent draws get their own runs above).
    const gner::ComplexReport cr = gner::complex_delta(gold.docs, pred_maps[0]);
    ordered_json cj;
    cj["overall"] = row_json(cr.overall);
    if (cr.simple) cj["simple"] = row_json(*cr.simple);
    if (cr.nested) cj["nested"] = row_json(*cr.nested);
    if (cr.discontinuous) cj["discontinuous"] = row_json(*cr.discontinuous);
    if (cr.delta_nested) cj["delta_nested"] = *cr.delta_nested;
    if (cr.delta_discont) cj["delta_discont"] = *cr.delta_discont;
    out_json["complex"] = cj;
  }
  out_json["table"] = table;
  emit_artifact(o.out, out_json.dump(2) + "\n", info);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOpts {
  std::string gold;
  std::string outputs;
  std::string format;
  std::string out;
};

int run_diagnose(const DiagnoseOpts& o, RunInfo info) {
  const gner::FormatId f = require_format(o.format);
  if (!gner::traits_of(f).requires_char_spans)
    throw UsageError("format '" + o.format +
                     "' carries no character spans; shift profiling needs a span format");
  info.inputs = {o.gold, o.outputs};
  const gner::Corpus gold = load_any_corpus(o.gold, std::nullopt, std::nullopt);
  const std::vector<gner::RawOutput> raw = read_outputs_jsonl(o.outputs);
  const std::vector<std::string> inventory = gner::label_inventory({&gold});

  std::map<std::string, const gner::AnnotatedDoc*> by_id;
  for (const auto& d : gold.docs) by_id[d.id] = &d;
  std::map<gner::DiagKind, std::size_t> tally;
  for (const auto& r : raw) {
    auto it = by_id.find(r.doc_id);
    if (it == by_id.end()) throw gner::Error("output references unknown doc id '" + r.doc_id + "'");
    const gner::ParseResult res = gner::decode(r.output, it->second->text, f, r.type, inventory);
    for (const auto& d : res.diagnostics) tally[d.kind]++;
  }

  const gner::ShiftHistogram hist = gner::shift_profile(gold, raw, f, inventory);
  ordered_json counts = ordered_json::object();
  for (int k = -8; k <= 8; ++k) {
    auto it = hist.counts.find(k);
    counts[std::to_string(k)] = it == hist.counts.end() ? 0 : it->second;
  }
  ordered_json diag = ordered_json::object();
  for (const auto& [k, n] : tally) diag[std::string(gner::diag_kind_name(k))] = n;
  ordered_json j{{"format", std::string(gner::format_name(f))},
                 {"counts", counts},
                 {"total_candidates", hist.total_candidates},
                 {"ungrounded_count", hist.ungrounded_count},
                 {"diagnostics", diag}};
  emit_artifact(o.out, j.dump(2) + "\n", info);
  return 0;
}

// ---------------------------------------------------------------------------
// robustness

struct RobustnessOpts {
  std::string corpus;
  std::string format;
  std::string grid;
  std::string out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

gner::CorruptionSpec spec_from_json(const ordered_json& j, std::uint64_t default_seed,
                                    const std::string& ctx) {
  if (!j.is_object()) throw gner::ParseError(ctx + ": grid entries must be objects");
  gner::CorruptionSpec s;
  s.seed = default_seed;
  s.shift_probability = j.value("shift_probability", 0.0);
  s.drop_probability = j.value("drop_probability", 0.0);
  s.spurious_probability = j.value("spurious_probability", 0.0);
  s.structural_noise_probability = j.value("structural_noise_probability", 0.0);
  if (j.contains("shift_magnitude_range")) {
    const auto& r = j["shift_magnitude_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
      throw gner::ParseError(ctx + ": shift_magnitude_range must be [min, max]");
    s.shift_min = r[0].get<int>();
    s.shift_max = r[1].get<int>();
  }
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  for (double p : {s.shift_probability, s.drop_probability, s.spurious_probability,
                   s.structural_noise_probability})
    if (p < 0.0 || p > 1.0) throw gner::ParseError(ctx + ": probabilities must be in [0, 1]");
  if (s.shift_min > s.shift_max)
    throw gner::ParseError(ctx + ": shift_magnitude_range min exceeds max");
  return s;
}

int run_robustness(const RobustnessOpts& o, RunInfo info) {
  const gner::FormatId f = require_format(o.format);
  info.inputs.push_back(o.corpus);
  info.seed = o.seed;
  const gner::Corpus corpus = load_any_corpus(o.corpus, std::nullopt, std::nullopt);

  std::vector<gner::CorruptionSpec> grid;
  if (o.grid.empty()) {
    for (double drop : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      gner::CorruptionSpec s;
      s.drop_probability = drop;
      s.seed = o.seed;
      grid.push_back(s);
    }
  } else {
    info.inputs.push_back(o.grid);
    ordered_json gj;
    try {
      gj = ordered_json::parse(read_file(o.grid));
    } catch (const ordered_json::exception& e) {
      throw gner::ParseError(o.grid + ": invalid JSON: " + e.what());
    }
    if (!gj.is_array() || gj.empty())
      throw gner::ParseError(o.grid + ": grid must be a non-empty JSON array");
    for (std::size_t i = 0; i < gj.size(); ++i)
      grid.push_back(spec_from_json(gj[i], o.seed, o.grid + "[" + std::to_string(i) + "]"));
  }

  std::vector<gner::CurvePoint> points(grid.size());
  parallel_for(grid.size(), o.jobs, [&](std::size_t i) {
    auto one = gner::robustness_curve(corpus, f, {grid[i]});
    points[i] = one.at(0);
  });
  emit_artifact(o.out, gner::curve_csv(points), info);
  return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsOpts {
  std::vector<std::string> corpora;
  std::string out;
};

int run_stats(const StatsOpts& o, RunInfo info) {
  ordered_json rows = ordered_json::array();
  for (const auto& path : o.corpora) {
    info.inputs.push_back(path);
    const gner::Corpus c = load_any_corpus(path, std::nullopt, std::nullopt);
    const gner::CorpusStats s = gner::corpus_stats(c);
    rows.push_back(ordered_json{{"path", path},
                                {"name", c.name},
                                {"split", std::string(gner::split_name(c.split))},
                                {"doc_count", s.doc_count},
                                {"entity_count", s.entity_count},
                                {"label_count", s.label_count},
                                {"labels", s.labels},
                                {"nested_pct", s.nested_pct},
                                {"discont_pct", s.discont_pct}});
  }
  emit_artifact(o.out, rows.dump(2) + "\n", info);
  return 0;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertOpts {
  std::string in;
  std::string out;
  std::string to;
  std::string name;
  std::string split;
  bool strict = false;
};

int run_convert(const ConvertOpts& o, RunInfo info) {
  std::optional<std::string> name;
  if (!o.name.empty()) name = o.name;
  std::optional<gner::Split> split;
  if (!o.split.empty()) split = require_split(o.split);
  info.inputs.push_back(o.in);
  const gner::Corpus c = load_any_corpus(o.in, name, split, o.strict);

  if (o.to == "json") {
    std::ostringstream body;
    gner::write_corpus_json(c, body);
    emit_artifact(o.out, body.str(), info);
  } else if (o.to == "conll") {
    std::ostringstream body;
    gner::write_conll(c, body);
    emit_artifact(o.out, body.str(), info);
  } else if (o.to == "brat") {
    if (o.out.empty()) throw UsageError("--to brat writes a directory; --out is required");
    for (const auto& d : c.docs) {
      atomic_write_file(fs::path(o.out) / (d.id + ".txt"), d.text);
      atomic_write_file(fs::path(o.out) / (d.id + ".ann"), gner::write_brat_ann(d));
      info.outputs.push_back((fs::path(o.out) / (d.id + ".txt")).string());
      info.outputs.push_back((fs::path(o.out) / (d.id + ".ann")).string());
    }
    write_manifest(fs::path(o.out) / "manifest.json", info);
  } else {
    throw UsageError("unknown output format '" + o.to + "' (expected json, conll, or brat)");
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  RunInfo info;
  info.started_at = now_iso8601();
  for (int i = 0; i < argc; ++i) {
    if (i) info.command += ' ';
    info.command += quote_arg(argv[i]);
  }

  CLI::App app{"Generative-NER corpus toolkit: format codecs, dataset construction, "
               "evaluation, and output diagnostics"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  EncodeOpts enc;
  auto* enc_cmd = app.add_subcommand("encode", "Encode gold annotations into one output format");
  enc_cmd->add_option("--corpus", enc.corpus, "Corpus file (canonical JSON, .conll, or brat dir)")
      ->required();
  enc_cmd->add_option("--format", enc.format, "Output format name")->required();
  enc_cmd->add_option("--types", enc.types, "Comma-separated type inventory (default: corpus labels)");
  enc_cmd->add_option("--out", enc.out, "Output JSONL path (default: stdout)");
  enc_cmd->add_option("--jobs", enc.jobs, "Worker threads");

  DecodeOpts dec;
  auto* dec_cmd = app.add_subcommand("decode", "Parse raw model outputs back into entities");
  dec_cmd->add_option("--outputs", dec.outputs, "Model outputs JSONL: {doc_id, type?, output}")
      ->required();
  dec_cmd->add_option("--corpus", dec.corpus, "Corpus the outputs refer to")->required();
  dec_cmd->add_option("--format", dec.format, "Output format name")->required();
  dec_cmd->add_option("--out", dec.out, "Decoded entities JSONL path (default: stdout)");
  dec_cmd->add_option("--jobs", dec.jobs, "Worker threads");

  BuildOpts bld;
  auto* bld_cmd = app.add_subcommand("build-dataset", "Build instruction-tuning JSONL splits");
  bld_cmd->add_option("--config", bld.config, "Build config JSON")->required();
  bld_cmd->add_option("--out-dir", bld.out_dir, "Output directory (overrides config)");
  bld_cmd->add_option("--seed", bld.seed, "Base seed (overrides config)");
  bld_cmd->add_option("--draws", bld.draws, "Number of independent draws (overrides config)");

  EvaluateOpts ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score predictions against gold");
  ev_cmd->add_option("--gold", ev.gold, "Gold corpus file")->required();
  ev_cmd->add_option("--pred", ev.preds,
                     "Predictions (corpus JSON or decode JSONL); repeat for multiple draws")
      ->required();
  ev_cmd->add_option("--mode", ev.mode, "Match mode: span_strict or surface_multiset");
  ev_cmd->add_flag("--complex", ev.complex_report, "Add nested/discontinuous subset deltas");
  ev_cmd->add_option("--out", ev.out, "Report JSON path (default: stdout)");

  DiagnoseOpts dg;
  auto* dg_cmd = app.add_subcommand("diagnose", "Span-shift histogram and diagnostic tally");
  dg_cmd->add_option("--gold", dg.gold, "Gold corpus file")->required();
  dg_cmd->add_option("--outputs", dg.outputs, "Model outputs JSONL: {doc_id, type?, output}")
      ->required();
  dg_cmd->add_option("--format", dg.format, "Span-bearing format name")->required();
  dg_cmd->add_option("--out", dg.out, "Histogram JSON path (default: stdout)");

  RobustnessOpts rb;
  auto* rb_cmd = app.add_subcommand("robustness", "Corruption-robustness curve (CSV)");
  rb_cmd->add_option("--corpus", rb.corpus, "Gold corpus file")->required();
  rb_cmd->add_option("--format", rb.format, "Output format name")->required();
  rb_cmd->add_option("--grid", rb.grid, "JSON array of corruption specs (default: drop sweep)");
  rb_cmd->add_option("--seed", rb.seed, "Seed for spec entries that do not carry one");
  rb_cmd->add_option("--out", rb.out, "CSV path (default: stdout)");
  rb_cmd->add_option("--jobs", rb.jobs, "Worker threads");

  StatsOpts st;
  auto* st_cmd = app.add_subcommand("stats", "Corpus statistics (docs, entities, structure)");
  st_cmd->add_option("corpora", st.corpora, "Corpus files or brat directories")->required();
  st_cmd->add_option("--out", st.out, "Stats JSON path (default: stdout)");

  ConvertOpts cv;
  auto* cv_cmd = app.add_subcommand("convert", "Convert a corpus between formats");
  cv_cmd->add_option("--in", cv.in, "Input corpus (canonical JSON, .conll, or brat dir)")
      ->required();
  cv_cmd->add_option("--to", cv.to, "Target format: json, conll, or brat")->required();
  cv_cmd->add_option("--out", cv.out, "Output path (brat: directory; default for others: stdout)");
  cv_cmd->add_option("--name", cv.name, "Corpus name override");
  cv_cmd->add_option("--split", cv.split, "Corpus split override (train, dev, test)");
  cv_cmd->add_flag("--strict", cv.strict, "Reject orphan I- tags instead of repairing");

  try {
    app.parse(argc, argv);
    if (enc_cmd->parsed()) return run_encode(enc, info);
    if (dec_cmd->parsed()) return run_decode(dec, info);
    if (bld_cmd->parsed()) return run_build_dataset(bld, info);
    if (ev_cmd->parsed()) return run_evaluate(ev, info);
    if (dg_cmd->parsed()) return run_diagnose(dg, info);
    if (rb_cmd->parsed()) return run_robustness(rb, info);
    if (st_cmd->parsed()) return run_stats(st, info);
    if (cv_cmd->parsed()) return run_convert(cv, info);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const gner::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
