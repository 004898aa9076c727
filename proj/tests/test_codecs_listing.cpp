#include <doctest.h>

#include <string>
#include <vector>

#include "gner/codecs.hpp"
#include "gner/core.hpp"
#include "support/gen.hpp"

using namespace gner;

namespace {

// The worked example used throughout: one sentence with a simple protein
// mention and two nested cell_type mentions.
const char* kText =
    "These results suggest that BCL6 plays a role in activated lymphocytes as an "
    "immediate early gene.";

AnnotatedDoc genia_doc() {
  return AnnotatedDoc::make("g1", "Genia", kText,
                            {Entity::make("protein", {{27, 31}}),
                             Entity::make("cell_type", {{48, 69}}),
                             Entity::make("cell_type", {{58, 69}})});
}

const std::vector<std::string> kInventory = {"cell_line", "protein", "RNA", "DNA", "cell_type"};

// Payload of the per-type turn for `type`, asserting turn structure.
std::string turn_payload(const EncodedTarget& t, const std::string& type) {
  for (const auto& turn : t.turns) {
    if (turn.queried_type && *turn.queried_type == type) return turn.payload;
  }
  FAIL("missing turn for type " << type);
  return {};
}

std::string only_payload(const EncodedTarget& t) {
  REQUIRE(t.turns.size() == 1);
  CHECK_FALSE(t.turns[0].queried_type.has_value());
  return t.turns[0].payload;
}

}  // namespace

TEST_CASE("per-type formats emit one turn per inventory type, in order") {
  const auto doc = genia_doc();
  for (const FormatId f : {FormatId::conv_term, FormatId::single_tag, FormatId::single_code,
                           FormatId::single_term, FormatId::single_span}) {
    const EncodedTarget t = encode(doc, f, kInventory);
    REQUIRE(t.turns.size() == kInventory.size());
    for (std::size_t i = 0; i < kInventory.size(); ++i) {
      REQUIRE(t.turns[i].queried_type.has_value());
      CHECK(*t.turns[i].queried_type == kInventory[i]);
    }
  }
}

TEST_CASE("conv_term turns") {
  const EncodedTarget t = encode(genia_doc(), FormatId::conv_term, kInventory);
  CHECK(turn_payload(t, "cell_line") == "Answer: []");
  CHECK(turn_payload(t, "protein") == "Answer: [\"BCL6\"]");
  CHECK(turn_payload(t, "RNA") == "Answer: []");
  CHECK(turn_payload(t, "DNA") == "Answer: []");
  CHECK(turn_payload(t, "cell_type") == "Answer: [\"activated lymphocytes\", \"lymphocytes\"]");
}

TEST_CASE("single_term turns match conv_term payloads") {
  const auto doc = genia_doc();
  const EncodedTarget a = encode(doc, FormatId::conv_term, kInventory);
  const EncodedTarget b = encode(doc, FormatId::single_term, kInventory);
  REQUIRE(a.turns.size() == b.turns.size());
  for (std::size_t i = 0; i < a.turns.size(); ++i) CHECK(a.turns[i].payload == b.turns[i].payload);
}

TEST_CASE("single_tag marks only the queried type; nesting stacks markers") {
  const EncodedTarget t = encode(genia_doc(), FormatId::single_tag, kInventory);
  CHECK(turn_payload(t, "protein") ==
        "Answer: These results suggest that @@BCL6## plays a role in activated lymphocytes "
        "as an immediate early gene.");
  CHECK(turn_payload(t, "cell_type") ==
        "Answer: These results suggest that BCL6 plays a role in @@activated "
        "@@lymphocytes#### as an immediate early gene.");
  CHECK(turn_payload(t, "DNA") == std::string("Answer: ") + kText);
}

TEST_CASE("multi_tag wraps every entity with properly nested type tags") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_tag, kInventory);
  CHECK(only_payload(t) ==
        "Answer: These results suggest that <protein>BCL6</protein> plays a role in "
        "<cell_type>activated <cell_type>lymphocytes</cell_type></cell_type> as an "
        "immediate early gene.");
}

TEST_CASE("multi_code emits the function block naming all inventory types") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_code, kInventory);
  // Note the trailing blanks after the def line and the list initializer.
  CHECK(only_payload(t) ==
        "Answer:\n"
        "```py\n"
        "def named_entity_recognition(input_text): \n"
        "        \"\"\" extract entities from the input_text. \"\"\"\n"
        "        input_text = \"These results suggest that BCL6 plays a role in activated "
        "lymphocytes as an immediate early gene.\"\n"
        "        entity_list = [] \n"
        "        # extracted entities for cell_line, protein, RNA, DNA, cell_type types.\n"
        "        entity_list.append({\"text\": \"activated lymphocytes\", \"type\": "
        "\"cell_type\"})\n"
        "        entity_list.append({\"text\": \"BCL6\", \"type\": \"protein\"})\n"
        "        entity_list.append({\"text\": \"lymphocytes\", \"type\": \"cell_type\"})\n"
        "```");
}

TEST_CASE("single_code appends plain surfaces for the queried type only") {
  const EncodedTarget t = encode(genia_doc(), FormatId::single_code, kInventory);
  const std::string protein = turn_payload(t, "protein");
  CHECK(protein.find("# extracted entities for protein type.") != std::string::npos);
  CHECK(protein.find("entity_list.append(\"BCL6\")") != std::string::npos);
  CHECK(protein.find("cell_type") == std::string::npos);
  const std::string rna = turn_payload(t, "RNA");
  CHECK(rna.find("entity_list.append") == std::string::npos);
  CHECK(rna.find("# extracted entities for RNA type.") != std::string::npos);
}

TEST_CASE("multi_term lists text/type objects sorted by surface") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_term, kInventory);
  CHECK(only_payload(t) ==
        "Answer: [{\"text\": \"activated lymphocytes\", \"type\": \"cell_type\"}, "
        "{\"text\": \"BCL6\", \"type\": \"protein\"}, "
        "{\"text\": \"lymphocytes\", \"type\": \"cell_type\"}]");
}

TEST_CASE("single_span lists compact character spans per type") {
  const EncodedTarget t = encode(genia_doc(), FormatId::single_span, kInventory);
  CHECK(turn_payload(t, "protein") == "Answer: [[27,31]]");
  CHECK(turn_payload(t, "cell_type") == "Answer: [[48,69],[58,69]]");
  CHECK(turn_payload(t, "cell_line") == "Answer: []");
}

TEST_CASE("multi_span lists span/type objects sorted by surface") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_span, kInventory);
  CHECK(only_payload(t) ==
        "Answer: [{\"span\": [48, 69], \"type\": \"cell_type\"}, "
        "{\"span\": [27, 31], \"type\": \"protein\"}, "
        "{\"span\": [58, 69], \"type\": \"cell_type\"}]");
}

TEST_CASE("multi_triple emits one semicolon triple per line") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_triple, kInventory);
  CHECK(only_payload(t) ==
        "Answer:\n"
        "activated lymphocytes; is a; cell_type\n"
        "BCL6; is a; protein\n"
        "lymphocytes; is a; cell_type");
}

TEST_CASE("multi_bio emits one tag line per nesting layer") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_bio, kInventory);
  CHECK(only_payload(t) ==
        "Layer 1: O O O O B-protein O O O O B-cell_type I-cell_type O O O O O\n"
        "Layer 2: O O O O O O O O O O B-cell_type O O O O O");
}

TEST_CASE("multi_brat emits tab-separated standoff lines") {
  const EncodedTarget t = encode(genia_doc(), FormatId::multi_brat, kInventory);
  CHECK(only_payload(t) ==
        "Answer:\n"
        "T1\tcell_type 48 69\tactivated lymphocytes\n"
        "T2\tprotein 27 31\tBCL6\n"
        "T3\tcell_type 58 69\tlymphocytes");
}

TEST_CASE("empty documents still produce well-formed payloads") {
  const auto doc = AnnotatedDoc::make("e", "Genia", kText, {});
  CHECK(only_payload(encode(doc, FormatId::multi_term, kInventory)) == "Answer: []");
  CHECK(only_payload(encode(doc, FormatId::multi_span, kInventory)) == "Answer: []");
  CHECK(only_payload(encode(doc, FormatId::multi_tag, kInventory)) ==
        std::string("Answer: ") + kText);
  CHECK(only_payload(encode(doc, FormatId::multi_triple, kInventory)) == "Answer:");
  const std::string bio = only_payload(encode(doc, FormatId::multi_bio, kInventory));
  CHECK(bio.substr(0, 9) == "Layer 1: ");
  CHECK(bio.find("B-") == std::string::npos);
  CHECK(bio.find('\n') == std::string::npos);
  CHECK(turn_payload(encode(doc, FormatId::single_term, kInventory), "protein") == "Answer: []");
}

TEST_CASE("encode validates compatibility and inventory membership") {
  const auto discont = gnertest::make_doc("d", "aa bb cc", {{"protein", {{0, 2}, {6, 8}}}}, "Genia");
  CHECK_THROWS_AS(encode(discont, FormatId::multi_bio, kInventory), Error);
  CHECK_THROWS_AS(encode(discont, FormatId::single_span, kInventory), Error);
  CHECK_NOTHROW(encode(discont, FormatId::multi_term, kInventory));

  const auto doc = genia_doc();
  CHECK_THROWS_AS(encode(doc, FormatId::multi_term, {"protein"}), Error);  // cell_type missing
}

TEST_CASE("prompt fills the fixed template") {
  const auto doc = genia_doc();
  for (const FormatId f : kAllFormats) {
    const std::string p = render_prompt(doc, f, kInventory);
    CHECK(p.rfind("The task you need to complete is named entity recognition. Follow Genia "
                  "guidelines.\n\n",
                  0) == 0);
    const std::string tail = std::string("\n\nText: ") + kText;
    REQUIRE(p.size() >= tail.size());
    CHECK(p.substr(p.size() - tail.size()) == tail);
  }
}

TEST_CASE("conv_term prompt instruction is the frozen dialogue wording") {
  const std::string p = render_prompt(genia_doc(), FormatId::conv_term, kInventory);
  CHECK(p.find("In each round of dialogue, we will provide you with an entity type. Please find "
               "all entities of that type in the input text and answer in the format [\"entity "
               "1\", \"entity 2\", ...], return [] if there is none.") != std::string::npos);
}

TEST_CASE("per-type prompt with a single-type inventory names only that type") {
  const auto doc = genia_doc();
  const std::string p = render_prompt(doc, FormatId::single_term, {"protein"});
  CHECK(p.find("protein") != std::string::npos);
  CHECK(p.find("cell_type") == std::string::npos);
  CHECK(p.find("DNA") == std::string::npos);
}

TEST_CASE("prompt handles empty text") {
  const auto doc = AnnotatedDoc::make("e", "Genia", "", {});
  const std::string p = render_prompt(doc, FormatId::multi_term, kInventory);
  CHECK(p.substr(p.size() - 6) == "Text: ");
}

TEST_CASE("listing order: case-insensitive surface, then byte, start, label") {
  //                      0    5    10   15   20   25
  const std::string text = "Zed apple Apple zed ant b";
  const std::vector<Entity> ents = {
      Entity::make("l1", {{0, 3}}),    // "Zed"
      Entity::make("l1", {{4, 9}}),    // "apple"
      Entity::make("l1", {{10, 15}}),  // "Apple"
      Entity::make("l1", {{16, 19}}),  // "zed"
      Entity::make("l1", {{20, 23}}),  // "ant"
      Entity::make("l0", {{24, 25}}),  // "b"
      Entity::make("l2", {{24, 25}}),  // "b" same span, later label
  };
  const auto order = listing_order(ents, text);
  std::vector<std::string> surfaces;
  for (const std::size_t i : order) surfaces.push_back(surface_of(ents[i], text));
  // ant < apple group < b group < zed group; within "apple": byte compare puts
  // 'A' (0x41) before 'a' (0x61); within "b": label l0 before l2; within
  // "zed": byte compare puts "Zed" first.
  CHECK(surfaces == std::vector<std::string>{"ant", "Apple", "apple", "b", "b", "Zed", "zed"});
  CHECK(ents[order[3]].label == "l0");
  CHECK(ents[order[4]].label == "l2");
}

TEST_CASE("listing order breaks exact-surface ties by start offset") {
  const std::string text = "ab cd ab";
  const std::vector<Entity> ents = {
      Entity::make("x", {{6, 8}}),
      Entity::make("x", {{0, 2}}),
  };
  const auto order = listing_order(ents, text);
  CHECK(ents[order[0]].fragments[0].start == 0);
  CHECK(ents[order[1]].fragments[0].start == 6);
}
