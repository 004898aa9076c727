#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gner/codecs.hpp"
#include "gner/core.hpp"
#include "gner/diagnose.hpp"
#include "gner/eval.hpp"
#include "gner/ingest.hpp"
#include "support/gen.hpp"

using namespace gner;

namespace {

// Decode every turn of a target against its doc and pool distinct entities.
std::vector<Entity> decode_all(const EncodedTarget& target, const AnnotatedDoc& doc,
                               const std::vector<std::string>& inv) {
  std::vector<Entity> out;
  std::set<std::pair<std::string, std::vector<Fragment>>> seen;
  for (const auto& turn : target.turns) {
    ParseResult r = decode(turn.payload, doc.text, target.format, turn.queried_type, inv);
    for (auto& e : r.entities)
      if (seen.insert({e.label, e.fragments}).second) out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t bucket(const ShiftHistogram& h, int k) {
  const auto it = h.counts.find(k);
  return it == h.counts.end() ? 0 : it->second;
}

std::size_t bucket_sum(const ShiftHistogram& h) {
  std::size_t s = 0;
  for (const auto& [k, n] : h.counts) s += n;
  return s;
}

// Gold encodings of every doc in the corpus, flattened to raw outputs.
std::vector<RawOutput> outputs_of(const Corpus& c, FormatId f,
                                  const std::vector<std::string>& inv) {
  std::vector<RawOutput> outs;
  for (const auto& doc : c.docs) {
    const EncodedTarget t = encode(doc, f, inv);
    for (const auto& turn : t.turns) outs.push_back({doc.id, turn.queried_type, turn.payload});
  }
  return outs;
}

AnnotatedDoc shifted_copy(const AnnotatedDoc& doc, int k) {
  std::vector<Entity> moved;
  for (const auto& e : doc.entities) {
    std::vector<Fragment> fs;
    for (const auto& f : e.fragments)
      fs.push_back({static_cast<std::size_t>(static_cast<long long>(f.start) + k),
                    static_cast<std::size_t>(static_cast<long long>(f.end) + k)});
    moved.push_back(Entity::make(e.label, std::move(fs)));
  }
  return AnnotatedDoc::make(doc.id, doc.dataset, doc.text, std::move(moved));
}

std::size_t total_entities(const Corpus& c) {
  std::size_t n = 0;
  for (const auto& d : c.docs) n += d.entities.size();
  return n;
}

// Fixed flat doc with one nested pair, used where exact payload bytes matter.
AnnotatedDoc gene_doc() {
  const std::string text = "the BRCA1 gene alters liver cells";
  return gnertest::make_doc_ents("g0", text,
                            {Entity::make("gene", {{4, 9}}), Entity::make("anatomy", {{22, 33}}),
                             Entity::make("anatomy", {{22, 27}})},
                            "toy");
}

const std::vector<std::string> kLabels = {"anatomy", "disease", "gene"};

}  // namespace

TEST_CASE("all-zero corruption returns the target unchanged") {
  const Corpus c = gnertest::gen_corpus(901, gnertest::GenOptions{}, 12, "idn", Split::test);
  const std::vector<std::string> inv = label_inventory({&c});
  const CorruptionSpec zero{};
  for (const auto& doc : c.docs) {
    for (const FormatId f : kAllFormats) {
      if (!compatible(f, doc)) continue;
      const EncodedTarget t = encode(doc, f, inv);
      const EncodedTarget out = corrupt(t, zero, doc, inv);
      CHECK(out.format == t.format);
      REQUIRE(out.turns.size() == t.turns.size());
      for (std::size_t i = 0; i < t.turns.size(); ++i) {
        CHECK(out.turns[i].payload == t.turns[i].payload);
        CHECK(out.turns[i].queried_type == t.turns[i].queried_type);
      }
    }
  }
}

TEST_CASE("drop probability one erases every mention") {
  const AnnotatedDoc doc = gene_doc();
  CorruptionSpec spec;
  spec.drop_probability = 1.0;
  spec.seed = 1;

  for (const FormatId f : kAllFormats) {
    const EncodedTarget noisy = corrupt(encode(doc, f, kLabels), spec, doc, kLabels);
    CHECK_MESSAGE(decode_all(noisy, doc, kLabels).empty(), format_name(f));
  }

  auto only_payload = [&](FormatId f) {
    const EncodedTarget t = corrupt(encode(doc, f, kLabels), spec, doc, kLabels);
    REQUIRE(t.turns.size() == 1);
    return t.turns[0].payload;
  };
  CHECK(only_payload(FormatId::multi_term) == "Answer: []");
  CHECK(only_payload(FormatId::multi_span) == "Answer: []");
  CHECK(only_payload(FormatId::multi_tag) == "Answer: " + doc.text);
  CHECK(only_payload(FormatId::multi_triple) == "Answer:");
  CHECK(only_payload(FormatId::multi_brat) == "Answer:");
  CHECK(only_payload(FormatId::multi_bio) == "Layer 1: O O O O O O");

  const EncodedTarget per_type = corrupt(encode(doc, FormatId::single_term, kLabels), spec, doc,
                                         kLabels);
  REQUIRE(per_type.turns.size() == kLabels.size());
  for (const auto& turn : per_type.turns) CHECK(turn.payload == "Answer: []");
}

TEST_CASE("mention noise on an empty doc is a no-op") {
  const AnnotatedDoc doc =
      gnertest::make_doc_ents("e0", "nothing to see here", std::vector<Entity>{}, "toy");
  CorruptionSpec spec;
  spec.drop_probability = 1.0;
  spec.spurious_probability = 1.0;
  spec.shift_probability = 1.0;
  spec.shift_min = -3;
  spec.shift_max = 3;
  spec.seed = 2;
  for (const FormatId f : kAllFormats) {
    const EncodedTarget t = encode(doc, f, kLabels);
    const EncodedTarget out = corrupt(t, spec, doc, kLabels);
    REQUIRE(out.turns.size() == t.turns.size());
    for (std::size_t i = 0; i < t.turns.size(); ++i)
      CHECK(out.turns[i].payload == t.turns[i].payload);
  }
}

TEST_CASE("shift corruption displaces spans by the configured amount") {
  const Corpus c = gnertest::gen_shift_corpus(31, 40, "shf");
  const std::vector<std::string> inv = label_inventory({&c});
  CorruptionSpec spec;
  spec.shift_probability = 1.0;
  spec.shift_min = -2;
  spec.shift_max = -2;
  spec.seed = 5;

  for (const FormatId f : {FormatId::multi_span, FormatId::single_span}) {
    for (const auto& doc : c.docs) {
      const EncodedTarget noisy = corrupt(encode(doc, f, inv), spec, doc, inv);
      const std::vector<Entity> got = decode_all(noisy, doc, inv);
      REQUIRE(got.size() == 1);
      const Entity& gold = doc.entities[0];
      CHECK(got[0].label == gold.label);
      CHECK(got[0].range().start == gold.range().start - 2);
      CHECK(got[0].range().end == gold.range().end - 2);
      CHECK(detect_span_shift(gold, got[0].range(), doc.text) == -2);
    }
  }

  spec.shift_min = 3;
  spec.shift_max = 3;
  for (std::size_t i = 0; i < 10; ++i) {
    const AnnotatedDoc& doc = c.docs[i];
    const EncodedTarget noisy = corrupt(encode(doc, FormatId::multi_span, inv), spec, doc, inv);
    const std::vector<Entity> got = decode_all(noisy, doc, inv);
    REQUIRE(got.size() == 1);
    CHECK(got[0].range().start == doc.entities[0].range().start + 3);
  }
}

TEST_CASE("shifts that would leave the text keep the mention in place") {
  const AnnotatedDoc doc =
      gnertest::make_doc_ents("b0", "ab cd ef", {Entity::make("gene", {{0, 2}})}, "toy");
  const EncodedTarget t = encode(doc, FormatId::multi_span, kLabels);

  CorruptionSpec spec;
  spec.shift_probability = 1.0;
  spec.seed = 3;

  spec.shift_min = -2;
  spec.shift_max = -2;
  CHECK(corrupt(t, spec, doc, kLabels).turns[0].payload == t.turns[0].payload);

  // A zero displacement is not a shift.
  spec.shift_min = 0;
  spec.shift_max = 0;
  CHECK(corrupt(t, spec, doc, kLabels).turns[0].payload == t.turns[0].payload);

  // An empty displacement range disables shifting.
  spec.shift_min = 2;
  spec.shift_max = 1;
  CHECK(corrupt(t, spec, doc, kLabels).turns[0].payload == t.turns[0].payload);
}

TEST_CASE("a shift landing on another mention drops the shifted one") {
  const std::string text = "aa bb aa bb";
  const AnnotatedDoc doc = gnertest::make_doc_ents(
      "c0", text, {Entity::make("gene", {{0, 2}}), Entity::make("gene", {{6, 8}})}, "toy");
  CorruptionSpec spec;
  spec.shift_probability = 1.0;
  spec.shift_min = 6;
  spec.shift_max = 6;
  spec.seed = 4;
  const EncodedTarget noisy = corrupt(encode(doc, FormatId::multi_span, kLabels), spec, doc,
                                      kLabels);
  const std::vector<Entity> got = decode_all(noisy, doc, kLabels);
  // First mention shifts onto the second gold mention and is discarded; the
  // second cannot shift inside the text and stays put.
  REQUIRE(got.size() == 1);
  CHECK(got[0].label == "gene");
  CHECK(got[0].range().start == 6);
  CHECK(got[0].range().end == 8);
}

TEST_CASE("structural noise leaves decoded entities intact") {
  std::vector<AnnotatedDoc> docs = {gene_doc()};
  const Corpus extra = gnertest::gen_corpus(902, gnertest::GenOptions{}, 8, "sn", Split::test);
  docs.insert(docs.end(), extra.docs.begin(), extra.docs.end());

  for (const std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    CorruptionSpec spec;
    spec.structural_noise_probability = 1.0;
    spec.seed = seed;
    for (const auto& doc : docs) {
      for (const FormatId f : kAllFormats) {
        if (!compatible(f, doc)) continue;
        const EncodedTarget t = encode(doc, f, kLabels);
        const EncodedTarget noisy = corrupt(t, spec, doc, kLabels);
        REQUIRE(noisy.turns.size() == t.turns.size());
        for (std::size_t i = 0; i < t.turns.size(); ++i)
          CHECK(noisy.turns[i].payload != t.turns[i].payload);
        CHECK_MESSAGE(decode_all(noisy, doc, kLabels) == doc.entities,
                      "doc " << doc.id << " format " << format_name(f) << " seed " << seed);
      }
    }
  }
}

TEST_CASE("corruption is deterministic and seed-sensitive") {
  const Corpus c = gnertest::gen_corpus(903, gnertest::GenOptions{}, 30, "det", Split::test);
  const std::vector<std::string> inv = label_inventory({&c});
  CorruptionSpec spec;
  spec.drop_probability = 0.5;
  spec.seed = 4;
  CorruptionSpec other = spec;
  other.seed = 9;

  std::size_t differing = 0;
  for (const auto& doc : c.docs) {
    const EncodedTarget t = encode(doc, FormatId::multi_term, inv);
    const EncodedTarget a = corrupt(t, spec, doc, inv);
    const EncodedTarget b = corrupt(t, spec, doc, inv);
    CHECK(a.turns[0].payload == b.turns[0].payload);
    if (corrupt(t, other, doc, inv).turns[0].payload != a.turns[0].payload) ++differing;
  }
  CHECK(differing >= 1);
}

TEST_CASE("raising drop probability only ever drops more") {
  const Corpus c = gnertest::gen_corpus(222, gnertest::GenOptions{}, 60, "mono", Split::test);
  std::vector<CorruptionSpec> grid;
  for (const double p : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    CorruptionSpec s;
    s.drop_probability = p;
    s.seed = 7;
    grid.push_back(s);
  }
  const std::vector<CurvePoint> pts = robustness_curve(c, FormatId::multi_term, grid);
  REQUIRE(pts.size() == grid.size());
  CHECK(pts.front().scores.f1 == 1.0);
  CHECK(pts.front().counts.tp == total_entities(c));
  CHECK(pts.back().counts.tp == 0);
  CHECK(pts.back().scores.f1 == 0.0);
  for (const auto& p : pts) CHECK(p.counts.fp == 0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].counts.tp <= pts[i - 1].counts.tp);
    CHECK(pts[i].scores.f1 <= pts[i - 1].scores.f1);
  }
}

TEST_CASE("robustness baseline with no noise is perfect for every format") {
  const Corpus c = gnertest::gen_corpus(333, gnertest::GenOptions{}, 40, "base", Split::test);
  for (const FormatId f : kAllFormats) {
    const std::vector<CurvePoint> pts = robustness_curve(c, f, {CorruptionSpec{}});
    REQUIRE(pts.size() == 1);
    CHECK_MESSAGE(pts[0].scores.f1 == 1.0, format_name(f));
    CHECK(pts[0].counts.fp == 0);
    CHECK(pts[0].counts.fn == 0);
    CHECK(pts[0].counts.tp >= 1);
  }
}

TEST_CASE("dropping half the mentions halves recall") {
  const Corpus c = gnertest::gen_corpus(444, gnertest::GenOptions{}, 600, "half", Split::test);
  const std::size_t n_gold = total_entities(c);
  REQUIRE(n_gold >= 1000);

  CorruptionSpec spec;
  spec.drop_probability = 0.5;
  spec.seed = 12;
  const std::vector<CurvePoint> pts = robustness_curve(c, FormatId::multi_term, {spec});
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].counts.fp == 0);
  CHECK(pts[0].counts.tp + pts[0].counts.fn == n_gold);
  CHECK(pts[0].scores.precision == 1.0);
  const double sigma = 0.5 / std::sqrt(static_cast<double>(n_gold));
  CHECK(std::abs(pts[0].scores.recall - 0.5) <= 3.0 * sigma);
}

TEST_CASE("spurious insertions add one wrong mention per gold mention") {
  gnertest::GenOptions opt;
  opt.min_tokens = 15;
  opt.max_tokens = 20;
  opt.max_entities = 3;
  opt.p_discont = 0.0;
  opt.p_nested = 0.2;
  const Corpus c = gnertest::gen_corpus(555, opt, 80, "spur", Split::test);
  REQUIRE(total_entities(c) >= 1);

  CorruptionSpec spec;
  spec.spurious_probability = 1.0;
  spec.seed = 8;
  const std::vector<CurvePoint> pts = robustness_curve(c, FormatId::multi_span, {spec});
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].counts.fn == 0);
  CHECK(pts[0].counts.tp == total_entities(c));
  CHECK(pts[0].counts.fp == pts[0].counts.tp);
  CHECK(pts[0].scores.recall == 1.0);
  CHECK(pts[0].scores.precision == 0.5);
}

TEST_CASE("shift profiling rejects formats without character spans") {
  const Corpus c = gnertest::gen_shift_corpus(41, 2, "rej");
  const std::vector<std::string> inv = label_inventory({&c});
  for (const FormatId f : kAllFormats) {
    if (traits_of(f).requires_char_spans) {
      CHECK_NOTHROW(shift_profile(c, {}, f, inv));
    } else {
      CHECK_THROWS_AS(shift_profile(c, {}, f, inv), Error);
    }
  }
}

TEST_CASE("outputs identical to gold put all mass at zero shift") {
  gnertest::GenOptions opt;
  opt.allow_discontinuous = false;
  const Corpus c = gnertest::gen_corpus(666, opt, 50, "ident", Split::test);
  const std::vector<std::string> inv = label_inventory({&c});
  const std::size_t n_gold = total_entities(c);
  REQUIRE(n_gold >= 1);

  for (const FormatId f : {FormatId::multi_span, FormatId::single_span}) {
    const ShiftHistogram h = shift_profile(c, outputs_of(c, f, inv), f, inv);
    CHECK(h.total_candidates == n_gold);
    CHECK(bucket(h, 0) == n_gold);
    CHECK(bucket_sum(h) == n_gold);
    CHECK(h.ungrounded_count == 0);
  }
}

TEST_CASE("uniformly injected shifts are recovered exactly") {
  const Corpus c = gnertest::gen_shift_corpus(777, 120, "inj");
  const std::vector<std::string> inv = label_inventory({&c});
  std::vector<RawOutput> outs;
  for (std::size_t i = 0; i < c.docs.size(); ++i) {
    const int k = (i % 2 == 0) ? -3 : 5;
    const EncodedTarget t = encode(shifted_copy(c.docs[i], k), FormatId::multi_span, inv);
    outs.push_back({c.docs[i].id, t.turns[0].queried_type, t.turns[0].payload});
  }
  const ShiftHistogram h = shift_profile(c, outs, FormatId::multi_span, inv);
  CHECK(h.total_candidates == 120);
  CHECK(bucket(h, -3) == 60);
  CHECK(bucket(h, 5) == 60);
  CHECK(bucket(h, 0) == 0);
  CHECK(h.ungrounded_count == 0);
}

TEST_CASE("clinical left-shift examples land in the expected buckets") {
  const std::string t1 = std::string(110, 'x') + " corneal abrasion noted";
  REQUIRE(t1.substr(111, 7) == "corneal");
  const std::string t2 = std::string(31, 'y') + " lipitor dose";
  REQUIRE(t2.substr(32, 7) == "lipitor");

  Corpus gold;
  gold.name = "clin";
  gold.split = Split::test;
  gold.docs.push_back(
      gnertest::make_doc_ents("c1", t1, {Entity::make("disease", {{111, 118}})}, "clin"));
  gold.docs.push_back(gnertest::make_doc_ents("c2", t2, {Entity::make("drug", {{32, 39}})}, "clin"));
  const std::vector<std::string> inv = {"disease", "drug"};

  const std::vector<RawOutput> outs = {
      {"c1", std::nullopt, "Answer: [{\"span\": [106, 113], \"type\": \"disease\"}]"},
      {"c2", std::nullopt, "Answer: [{\"span\": [30, 37], \"type\": \"drug\"}]"},
  };
  const ShiftHistogram h = shift_profile(gold, outs, FormatId::multi_span, inv);
  CHECK(h.total_candidates == 2);
  CHECK(bucket(h, -5) == 1);
  CHECK(bucket(h, -2) == 1);
  CHECK(bucket(h, 0) == 0);
  CHECK(h.ungrounded_count == 0);
}

TEST_CASE("predictions pairing with nothing become ungrounded") {
  const std::string text = "aaaa bbbb cccc dddd eeee";
  const AnnotatedDoc doc =
      gnertest::make_doc_ents("u0", text, {Entity::make("gene", {{0, 4}})}, "toy");
  Corpus gold;
  gold.name = "toy";
  gold.split = Split::test;
  gold.docs.push_back(doc);
  const std::vector<std::string> inv = {"disease", "gene"};

  // Too far (+15), wrong length, and wrong label in one output.
  const std::vector<RawOutput> outs = {
      {"u0", std::nullopt,
       "Answer: [{\"span\": [15, 19], \"type\": \"gene\"}, "
       "{\"span\": [2, 8], \"type\": \"gene\"}, "
       "{\"span\": [0, 4], \"type\": \"disease\"}]"}};
  const ShiftHistogram h = shift_profile(gold, outs, FormatId::multi_span, inv);
  CHECK(h.total_candidates == 3);
  CHECK(h.ungrounded_count == 3);
  CHECK(bucket_sum(h) == 0);
}

TEST_CASE("discontinuous predictions are ungrounded") {
  const AnnotatedDoc doc =
      gnertest::make_doc_ents("b1", "ab cd ef", {Entity::make("gene", {{0, 2}})}, "toy");
  Corpus gold;
  gold.name = "toy";
  gold.split = Split::test;
  gold.docs.push_back(doc);
  const std::vector<std::string> inv = {"gene"};

  const std::vector<RawOutput> outs = {
      {"b1", std::nullopt, "Answer: T1\tgene 0 2;6 8\tab ef"}};
  const ShiftHistogram h = shift_profile(gold, outs, FormatId::multi_brat, inv);
  CHECK(h.total_candidates == 1);
  CHECK(h.ungrounded_count == 1);
  CHECK(bucket_sum(h) == 0);
}

TEST_CASE("exact matches consume their gold mention first") {
  const std::string text = "aaaa bbbb cccc dddd";
  const AnnotatedDoc doc = gnertest::make_doc_ents(
      "p0", text, {Entity::make("gene", {{0, 4}}), Entity::make("gene", {{10, 14}})}, "toy");
  Corpus gold;
  gold.name = "toy";
  gold.split = Split::test;
  gold.docs.push_back(doc);
  const std::vector<std::string> inv = {"gene"};

  // The exact prediction claims the gold at 10; the near miss at 12 can then
  // only pair with the gold at 0, which is too far away.
  const std::vector<RawOutput> outs = {
      {"p0", std::nullopt,
       "Answer: [{\"span\": [10, 14], \"type\": \"gene\"}, "
       "{\"span\": [12, 16], \"type\": \"gene\"}]"}};
  const ShiftHistogram h = shift_profile(gold, outs, FormatId::multi_span, inv);
  CHECK(h.total_candidates == 2);
  CHECK(bucket(h, 0) == 1);
  CHECK(bucket(h, 2) == 0);
  CHECK(h.ungrounded_count == 1);
}

TEST_CASE("shift pairing prefers the smallest displacement, negative on ties") {
  Corpus gold;
  gold.name = "toy";
  gold.split = Split::test;
  const std::vector<std::string> inv = {"gene"};

  const std::string text = "aaaa bbbb cccc dddd eeee";
  gold.docs.push_back(gnertest::make_doc_ents(
      "t0", text, {Entity::make("gene", {{10, 14}}), Entity::make("gene", {{18, 22}})}, "toy"));
  gold.docs.push_back(gnertest::make_doc_ents(
      "t1", text, {Entity::make("gene", {{0, 4}}), Entity::make("gene", {{10, 14}})}, "toy"));

  const std::vector<RawOutput> outs = {
      // +4 vs -4 tie, then +8 vs -2.
      {"t0", std::nullopt, "Answer: [{\"span\": [14, 18], \"type\": \"gene\"}]"},
      {"t1", std::nullopt, "Answer: [{\"span\": [8, 12], \"type\": \"gene\"}]"},
  };
  const ShiftHistogram h = shift_profile(gold, outs, FormatId::multi_span, inv);
  CHECK(bucket(h, -4) == 1);
  CHECK(bucket(h, 4) == 0);
  CHECK(bucket(h, -2) == 1);
  CHECK(bucket(h, 8) == 0);
  CHECK(h.ungrounded_count == 0);
}

TEST_CASE("histogram buckets and ungrounded outputs partition the candidates") {
  const Corpus c = gnertest::gen_shift_corpus(888, 60, "mix");
  const std::vector<std::string> inv = label_inventory({&c});
  CorruptionSpec spec;
  spec.shift_probability = 0.7;
  spec.shift_min = -6;
  spec.shift_max = 6;
  spec.drop_probability = 0.2;
  spec.seed = 13;

  std::vector<RawOutput> outs;
  for (const auto& doc : c.docs) {
    const EncodedTarget noisy = corrupt(encode(doc, FormatId::multi_span, inv), spec, doc, inv);
    outs.push_back({doc.id, noisy.turns[0].queried_type, noisy.turns[0].payload});
  }
  const ShiftHistogram h = shift_profile(c, outs, FormatId::multi_span, inv);
  CHECK(h.total_candidates <= c.docs.size());
  CHECK(bucket_sum(h) + h.ungrounded_count == h.total_candidates);
  CHECK(bucket_sum(h) <= h.total_candidates);
}

TEST_CASE("shift profiling rejects outputs for unknown docs") {
  const Corpus c = gnertest::gen_shift_corpus(51, 2, "unk");
  const std::vector<std::string> inv = label_inventory({&c});
  const std::vector<RawOutput> outs = {{"nope", std::nullopt, "Answer: {}"}};
  CHECK_THROWS_AS(shift_profile(c, outs, FormatId::multi_span, inv), Error);
}

TEST_CASE("curve tables render one row per grid point") {
  const Corpus c = gnertest::gen_shift_corpus(61, 3, "csv");

  std::vector<CorruptionSpec> grid;
  CorruptionSpec clean;
  clean.seed = 9;
  grid.push_back(clean);
  CorruptionSpec half = clean;
  half.drop_probability = 0.5;
  grid.push_back(half);
  CorruptionSpec busy;
  busy.shift_probability = 0.25;
  busy.shift_min = -4;
  busy.shift_max = 4;
  busy.drop_probability = 0.1;
  busy.spurious_probability = 0.05;
  busy.structural_noise_probability = 0.5;
  busy.seed = 123;
  grid.push_back(busy);

  const std::vector<CurvePoint> pts = robustness_curve(c, FormatId::multi_span, grid);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].scores.f1 == 1.0);

  const std::string csv = curve_csv(pts);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < csv.size()) {
    const std::size_t nl = csv.find('\n', start);
    REQUIRE(nl != std::string::npos);  // every line is newline-terminated
    lines.push_back(csv.substr(start, nl - start));
    start = nl + 1;
  }
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "shift_probability,shift_min,shift_max,drop_probability,spurious_probability,"
        "structural_noise_probability,seed,precision,recall,f1");
  CHECK(lines[1] == "0,0,0,0,0,0,9,1.000000,1.000000,1.000000");
  CHECK(lines[2].rfind("0,0,0,0.5,0,0,9,", 0) == 0);
  CHECK(lines[3].rfind("0.25,-4,4,0.1,0.05,0.5,123,", 0) == 0);
}
