#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "gner/codecs.hpp"
#include "gner/text.hpp"

namespace gner {
namespace {

using json = nlohmann::ordered_json;

// --- payload preprocessing ---------------------------------------------------

void normalize_newlines(std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
    out += s[i];
  }
  s = std::move(out);
}

void lstrip(std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && is_ascii_space(s[i])) ++i;
  s.erase(0, i);
}

bool eat_prefix(std::string& s, std::string_view prefix) {
  if (s.rfind(prefix, 0) != 0) return false;
  s.erase(0, prefix.size());
  return true;
}

// Drops a leading chat-role prefix like "assistant :: " or "Assistant: ".
void strip_role_prefix(std::string& s) {
  for (std::string_view role : {"assistant", "Assistant", "user", "User", "system", "System"}) {
    if (s.rfind(role, 0) != 0) continue;
    std::size_t i = role.size();
    while (i < s.size() && s[i] == ' ') ++i;
    if (i < s.size() && s[i] == ':') {
      ++i;
      if (i < s.size() && s[i] == ':') ++i;
      if (i < s.size() && s[i] == ' ') ++i;
      s.erase(0, i);
    }
    return;
  }
}

// If the body starts with a ``` fence, drops the fence line and a matching
// closing fence.
void unwrap_leading_fence(std::string& s) {
  if (s.rfind("```", 0) != 0) return;
  const std::size_t nl = s.find('\n');
  if (nl == std::string::npos) return;
  std::string body = s.substr(nl + 1);
  const std::size_t close = body.rfind("```");
  if (close != std::string::npos && body.find_first_not_of(" \t\n", close + 3) == std::string::npos)
    body.erase(close);
  s = std::move(body);
}

// Removes "Answer:" plus at most one following space or newline, so inline
// payloads keep their exact alignment and block payloads start at their
// first line.
void strip_answer_prefix(std::string& s) {
  if (!eat_prefix(s, "Answer:")) return;
  if (!s.empty() && s[0] == ' ')
    s.erase(0, 1);
  else if (!s.empty() && s[0] == '\n')
    s.erase(0, 1);
}

std::string preprocess(std::string payload) {
  normalize_newlines(payload);
  lstrip(payload);
  strip_role_prefix(payload);
  lstrip(payload);
  unwrap_leading_fence(payload);
  lstrip(payload);
  strip_answer_prefix(payload);
  unwrap_leading_fence(payload);
  return payload;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string::npos) nl = s.size();
    out.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && is_ascii_space(s[a])) ++a;
  while (b > a && is_ascii_space(s[b - 1])) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_ws_tokens(std::string_view line) {
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

// First balanced JSON array in s, respecting string literals. Returns the
// [begin, end) byte range of the array.
std::optional<std::pair<std::size_t, std::size_t>> find_json_array(const std::string& s) {
  const std::size_t open = s.find('[');
  if (open == std::string::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '[')
      ++depth;
    else if (c == ']' && --depth == 0)
      return std::make_pair(open, i + 1);
  }
  return std::nullopt;
}

// --- surface grounding --------------------------------------------------------

// Maps decoded surface strings back to character spans: leftmost unused
// exact occurrence; each mention consumes one occurrence of its surface.
// Surfaces with spaces that never occur contiguously fall back to greedy
// longest-prefix chunks matched left to right.
class GroundTracker {
 public:
  explicit GroundTracker(const TextIndex& idx) : idx_(idx) {}

  std::optional<std::vector<Fragment>> ground(const std::string& surface) {
    if (surface.empty()) return std::nullopt;
    const std::size_t len = scalar_length(surface);
    std::set<std::size_t>& used = used_[surface];
    std::size_t from = 0;
    while (auto at = idx_.find(surface, from)) {
      if (!used.count(*at)) {
        used.insert(*at);
        return std::vector<Fragment>{{*at, *at + len}};
      }
      from = *at + 1;
    }
    return ground_discontinuous(surface);
  }

 private:
  std::optional<std::vector<Fragment>> ground_discontinuous(const std::string& surface) {
    std::vector<std::string> words;
    std::size_t start = 0;
    while (start <= surface.size()) {
      std::size_t sp = surface.find(' ', start);
      if (sp == std::string::npos) sp = surface.size();
      words.push_back(surface.substr(start, sp - start));
      start = sp + 1;
    }
    if (words.size() < 2) return std::nullopt;

    std::vector<Fragment> frags;
    std::size_t pos = 0, w = 0;
    while (w < words.size()) {
      bool matched = false;
      for (std::size_t k = words.size() - w; k >= 1; --k) {
        std::string chunk = words[w];
        for (std::size_t t = 1; t < k; ++t) chunk += " " + words[w + t];
        if (auto at = idx_.find(chunk, pos)) {
          const std::size_t clen = scalar_length(chunk);
          frags.push_back({*at, *at + clen});
          pos = *at + clen + 1;  // next piece starts past the join gap
          w += k;
          matched = true;
          break;
        }
      }
      if (!matched) return std::nullopt;
    }
    return frags;
  }

  const TextIndex& idx_;
  std::map<std::string, std::set<std::size_t>> used_;
};

// --- shared decoder state ------------------------------------------------------

struct Dec {
  const TextIndex idx;
  const std::vector<std::string>& inventory;
  ParseResult res;
  GroundTracker tracker;
  std::set<std::pair<std::string, std::vector<Fragment>>> seen;

  Dec(const std::string& text, const std::vector<std::string>& inv)
      : idx(text), inventory(inv), tracker(idx) {}

  bool known_type(const std::string& t) const {
    return inventory.empty() ||
           std::find(inventory.begin(), inventory.end(), t) != inventory.end();
  }

  void diag(DiagKind kind, std::string message, std::string location) {
    res.diagnostics.push_back({kind, std::move(message), std::move(location)});
  }

  void add(const std::string& label, std::vector<Fragment> frags, const std::string& loc) {
    Entity e;
    try {
      e = Entity::make(label, std::move(frags));
    } catch (const Error& err) {
      diag(DiagKind::MALFORMED_STRUCTURE, err.what(), loc);
      return;
    }
    if (!seen.insert({e.label, e.fragments}).second) {
      diag(DiagKind::DUPLICATE, "duplicate mention of '" + label + "'", loc);
      return;
    }
    res.entities.push_back(std::move(e));
  }

  // Ground a surface and add the entity, or record why not.
  void add_surface(const std::string& label, const std::string& surface, const std::string& loc) {
    if (!known_type(label)) {
      diag(DiagKind::UNKNOWN_TYPE, "unknown entity type '" + label + "'", loc);
      return;
    }
    auto frags = tracker.ground(surface);
    if (!frags) {
      diag(DiagKind::UNGROUNDED_SURFACE, "surface '" + surface + "' not found in text", loc);
      return;
    }
    add(label, std::move(*frags), loc);
  }

  ParseResult finish() {
    std::sort(res.entities.begin(), res.entities.end());
    return std::move(res);
  }
};

// --- per-format decoders ---------------------------------------------------------

// Parses the first JSON array in body; returns std::nullopt after recording a
// diagnostic when there is none.
std::optional<json> parse_array(Dec& d, const std::string& body) {
  const auto range = find_json_array(body);
  if (!range) {
    d.diag(DiagKind::MALFORMED_STRUCTURE, "no JSON list found in payload", "payload");
    return std::nullopt;
  }
  const std::string sub = body.substr(range->first, range->second - range->first);
  json arr = json::parse(sub, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) {
    d.diag(DiagKind::MALFORMED_STRUCTURE, "unparseable JSON list", "payload");
    return std::nullopt;
  }
  if (body.find_first_not_of(" \t\n", range->second) != std::string::npos)
    d.diag(DiagKind::MALFORMED_STRUCTURE, "trailing content after list ignored", "payload");
  return arr;
}

void decode_term_list(Dec& d, const std::string& body, const std::string& qtype) {
  auto arr = parse_array(d, body);
  if (!arr) return;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string loc = "item " + std::to_string(i);
    const json& item = (*arr)[i];
    if (!item.is_string()) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "expected a string item", loc);
      continue;
    }
    d.add_surface(qtype, item.get<std::string>(), loc);
  }
}

void decode_multi_term(Dec& d, const std::string& body) {
  auto arr = parse_array(d, body);
  if (!arr) return;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string loc = "item " + std::to_string(i);
    const json& item = (*arr)[i];
    if (!item.is_object() || !item.contains("text") || !item.contains("type") ||
        !item["text"].is_string() || !item["type"].is_string()) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "expected {\"text\", \"type\"} item", loc);
      continue;
    }
    d.add_surface(item["type"].get<std::string>(), item["text"].get<std::string>(), loc);
  }
}

// Accepts integral numbers (including whole-valued floats); nullopt otherwise.
std::optional<long long> as_integer(const json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_unsigned()) return static_cast<long long>(v.get<unsigned long long>());
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x == static_cast<double>(static_cast<long long>(x))) return static_cast<long long>(x);
  }
  return std::nullopt;
}

// Validates one [start, end) pair against the text; records a diagnostic and
// returns nullopt when unusable.
std::optional<Fragment> checked_span(Dec& d, const json& jstart, const json& jend,
                                     const std::string& loc) {
  const auto s = as_integer(jstart), e = as_integer(jend);
  if (!s || !e) {
    d.diag(DiagKind::MALFORMED_STRUCTURE, "span bounds must be integers", loc);
    return std::nullopt;
  }
  if (*s < 0 || *e < 0 || *s >= *e ||
      static_cast<std::size_t>(*e) > d.idx.scalars()) {
    d.diag(DiagKind::OUT_OF_BOUNDS_SPAN,
           "span [" + std::to_string(*s) + "," + std::to_string(*e) + ") outside text of length " +
               std::to_string(d.idx.scalars()),
           loc);
    return std::nullopt;
  }
  return Fragment{static_cast<std::size_t>(*s), static_cast<std::size_t>(*e)};
}

void decode_single_span(Dec& d, const std::string& body, const std::string& qtype) {
  auto arr = parse_array(d, body);
  if (!arr) return;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string loc = "item " + std::to_string(i);
    const json& item = (*arr)[i];
    if (!item.is_array() || item.size() != 2) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "expected a [start, end] pair", loc);
      continue;
    }
    if (auto f = checked_span(d, item[0], item[1], loc)) d.add(qtype, {*f}, loc);
  }
}

void decode_multi_span(Dec& d, const std::string& body) {
  auto arr = parse_array(d, body);
  if (!arr) return;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const std::string loc = "item " + std::to_string(i);
    const json& item = (*arr)[i];
    if (!item.is_object() || !item.contains("span") || !item.contains("type") ||
        !item["span"].is_array() || item["span"].size() != 2 || !item["type"].is_string()) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "expected {\"span\": [s, e], \"type\": t} item", loc);
      continue;
    }
    const std::string label = item["type"].get<std::string>();
    if (!d.known_type(label)) {
      d.diag(DiagKind::UNKNOWN_TYPE, "unknown entity type '" + label + "'", loc);
      continue;
    }
    if (auto f = checked_span(d, item["span"][0], item["span"][1], loc)) d.add(label, {*f}, loc);
  }
}

void decode_triples(Dec& d, const std::string& body) {
  const std::vector<std::string> lines = split_lines(body);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = trim(lines[ln]);
    if (line.empty()) continue;
    const std::string loc = "line " + std::to_string(ln + 1);
    // surface; relation; type — the surface may itself contain semicolons,
    // so split from the right.
    const std::size_t semi2 = line.rfind(';');
    const std::size_t semi1 = semi2 == std::string::npos ? std::string::npos
                                                         : line.rfind(';', semi2 - 1);
    if (semi1 == std::string::npos) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "expected 'entity; is a; type'", loc);
      continue;
    }
    const std::string surface = trim(line.substr(0, semi1));
    const std::string label = trim(line.substr(semi2 + 1));
    if (surface.empty() || label.empty()) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "empty entity or type field", loc);
      continue;
    }
    d.add_surface(label, surface, loc);
  }
}

void decode_code(Dec& d, const std::string& body, const std::optional<std::string>& qtype) {
  // Use the fenced region when present; eat_prefix handling already unwrapped
  // a leading fence, so search for an interior one. An unpaired fence can be
  // either an opening fence whose close was lost or a stray closing fence
  // with trailing chatter; keep whichever side still holds the code.
  std::string code = body;
  const std::size_t fence = code.find("```");
  if (fence != std::string::npos) {
    std::size_t start = code.find('\n', fence);
    if (start == std::string::npos) {
      code = code.substr(0, fence);
    } else {
      ++start;
      const std::size_t close = code.find("```", start);
      if (close != std::string::npos)
        code = code.substr(start, close - start);
      else if (code.find("entity_list.append(", start) != std::string::npos)
        code = code.substr(start);
      else
        code = code.substr(0, fence);
    }
  }

  const std::vector<std::string> lines = split_lines(code);
  bool saw_append = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    const std::size_t call = line.find("entity_list.append(");
    if (call == std::string::npos) continue;
    saw_append = true;
    const std::string loc = "line " + std::to_string(ln + 1);
    const std::size_t open = line.find('(', call);
    // The argument is a JSON value; find its balanced closing parenthesis.
    int depth = 0;
    bool in_string = false, escaped = false;
    std::size_t close = std::string::npos;
    for (std::size_t i = open; i < line.size(); ++i) {
      const char c = line[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"')
        in_string = true;
      else if (c == '(')
        ++depth;
      else if (c == ')' && --depth == 0) {
        close = i;
        break;
      }
    }
    if (close == std::string::npos) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "unbalanced append call", loc);
      continue;
    }
    const std::string arg = trim(line.substr(open + 1, close - open - 1));
    const json v = json::parse(arg, nullptr, false);
    if (qtype) {
      if (!v.is_string()) {
        d.diag(DiagKind::MALFORMED_STRUCTURE, "expected a quoted surface string", loc);
        continue;
      }
      d.add_surface(*qtype, v.get<std::string>(), loc);
    } else {
      if (!v.is_object() || !v.contains("text") || !v.contains("type") ||
          !v["text"].is_string() || !v["type"].is_string()) {
        d.diag(DiagKind::MALFORMED_STRUCTURE, "expected {\"text\", \"type\"} argument", loc);
        continue;
      }
      d.add_surface(v["type"].get<std::string>(), v["text"].get<std::string>(), loc);
    }
  }
  (void)saw_append;  // zero appends is a legitimate empty answer
}

void decode_brat(Dec& d, const std::string& body) {
  const std::vector<std::string> lines = split_lines(body);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = trim(lines[ln]);
    if (line.empty()) continue;
    const std::string loc = "line " + std::to_string(ln + 1);
    if (line[0] != 'T') {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "not a T line", loc);
      continue;
    }

    std::string tid, span_field;
    std::optional<std::string> surface;
    const std::size_t tab1 = line.find('\t');
    if (tab1 != std::string::npos) {
      tid = line.substr(0, tab1);
      const std::size_t tab2 = line.find('\t', tab1 + 1);
      if (tab2 != std::string::npos) {
        span_field = line.substr(tab1 + 1, tab2 - tab1 - 1);
        surface = line.substr(tab2 + 1);
      } else {
        span_field = line.substr(tab1 + 1);
      }
    } else {
      // Whitespace fallback: "T1 TYPE s e[;s e]* surface words...".
      const std::vector<std::string> toks = split_ws_tokens(line);
      if (toks.size() < 4) {
        d.diag(DiagKind::MALFORMED_STRUCTURE, "expected 'Tn TYPE start end surface'", loc);
        continue;
      }
      tid = toks[0];
      span_field = toks[1];
      std::size_t i = 2;
      const auto numeric_piece = [](const std::string& t) {
        return !t.empty() && t.find_first_not_of("0123456789;") == std::string::npos;
      };
      for (; i < toks.size() && numeric_piece(toks[i]); ++i) span_field += " " + toks[i];
      std::string rest;
      for (; i < toks.size(); ++i) rest += (rest.empty() ? "" : " ") + toks[i];
      if (!rest.empty()) surface = rest;
    }

    // span_field: "TYPE s e[;s e]*"
    const std::vector<std::string> head = split_ws_tokens(span_field);
    if (head.size() < 3) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, tid + ": malformed span field", loc);
      continue;
    }
    const std::string label = head[0];
    std::string offsets;
    for (std::size_t i = 1; i < head.size(); ++i) offsets += (i > 1 ? " " : "") + head[i];

    std::vector<Fragment> frags;
    bool ok = true;
    std::size_t piece_start = 0;
    while (piece_start <= offsets.size() && ok) {
      std::size_t semi = offsets.find(';', piece_start);
      if (semi == std::string::npos) semi = offsets.size();
      const std::vector<std::string> nums =
          split_ws_tokens(std::string_view(offsets).substr(piece_start, semi - piece_start));
      long long s = -1, e = -1;
      if (nums.size() == 2) {
        try {
          s = std::stoll(nums[0]);
          e = std::stoll(nums[1]);
        } catch (...) {
          s = -1;
        }
      }
      if (s < 0 || e < 0) {
        d.diag(DiagKind::MALFORMED_STRUCTURE, tid + ": malformed offsets", loc);
        ok = false;
        break;
      }
      if (s >= e || static_cast<std::size_t>(e) > d.idx.scalars()) {
        d.diag(DiagKind::OUT_OF_BOUNDS_SPAN,
               tid + ": span [" + nums[0] + "," + nums[1] + ") outside text", loc);
        ok = false;
        break;
      }
      frags.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(e)});
      if (semi == offsets.size()) break;
      piece_start = semi + 1;
    }
    if (!ok) continue;

    if (!d.known_type(label)) {
      d.diag(DiagKind::UNKNOWN_TYPE, tid + ": unknown entity type '" + label + "'", loc);
      continue;
    }
    Entity entity;
    try {
      entity = Entity::make(label, std::move(frags));
    } catch (const Error& err) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, tid + ": " + err.what(), loc);
      continue;
    }

    if (surface) {
      std::string expect;
      for (std::size_t i = 0; i < entity.fragments.size(); ++i) {
        if (i) expect += ' ';
        const auto& f = entity.fragments[i];
        expect += d.idx.slice(f.start, f.end);
      }
      if (expect != *surface) {
        // Cross-validate: does the stated surface sit at a small constant
        // displacement from the claimed span?
        std::optional<int> shift;
        if (!entity.discontinuous()) {
          const Fragment r = entity.fragments.front();
          const std::size_t slen = scalar_length(*surface);
          for (int mag = 1; mag <= 8 && !shift; ++mag) {
            for (int sign : {-1, +1}) {
              const long long cs = static_cast<long long>(r.start) + sign * mag;
              if (cs < 0) continue;
              const std::size_t start = static_cast<std::size_t>(cs);
              if (start + slen > d.idx.scalars()) continue;
              if (d.idx.slice(start, start + slen) == *surface) {
                shift = sign * mag;
                break;
              }
            }
          }
        }
        if (shift) {
          d.diag(DiagKind::SPAN_SHIFT_SUSPECTED,
                 tid + ": stated surface found at shift " + std::to_string(*shift) +
                     " from the claimed span",
                 loc);
        } else {
          d.diag(DiagKind::UNGROUNDED_SURFACE,
                 tid + ": stated surface '" + *surface + "' does not match the claimed span",
                 loc);
        }
        continue;
      }
    }
    if (!d.seen.insert({entity.label, entity.fragments}).second) {
      d.diag(DiagKind::DUPLICATE, tid + ": duplicate mention", loc);
      continue;
    }
    d.res.entities.push_back(std::move(entity));
  }
}

bool looks_like_bio_tag(const std::string& t) {
  if (t == "O") return true;
  return t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-';
}

void decode_bio(Dec& d, const std::string& body) {
  const std::vector<TokenSpan> toks = d.idx.tokens();
  const std::vector<std::string> lines = split_lines(body);
  std::size_t layer_no = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line = trim(lines[ln]);
    if (line.empty()) continue;
    if (line.rfind("Layer", 0) == 0) {
      const std::size_t colon = line.find(':');
      if (colon != std::string::npos) line = trim(line.substr(colon + 1));
    }
    std::vector<std::string> tags = split_ws_tokens(line);
    if (tags.empty()) continue;
    const bool taggy = std::all_of(tags.begin(), tags.end(), looks_like_bio_tag);
    if (!taggy) {
      d.diag(DiagKind::MALFORMED_STRUCTURE, "unrecognized line", "line " + std::to_string(ln + 1));
      continue;
    }
    ++layer_no;
    const std::string loc = "layer " + std::to_string(layer_no);
    if (tags.size() != toks.size())
      d.diag(DiagKind::LAYER_MISMATCH,
             "layer has " + std::to_string(tags.size()) + " tags for " +
                 std::to_string(toks.size()) + " tokens",
             loc);
    const std::size_t n = std::min(tags.size(), toks.size());
    std::string open_label;
    std::size_t open_start = 0, open_end = 0;
    auto close = [&]() {
      if (!open_label.empty()) d.add(open_label, {{open_start, open_end}}, loc);
      open_label.clear();
    };
    for (std::size_t t = 0; t < n; ++t) {
      const std::string& tag = tags[t];
      if (tag == "O") {
        close();
        continue;
      }
      const std::string label = tag.substr(2);
      if (!d.known_type(label)) {
        d.diag(DiagKind::UNKNOWN_TYPE, "unknown entity type '" + label + "'",
               loc + " token " + std::to_string(t));
        close();
        continue;
      }
      if (tag[0] == 'B' || label != open_label) {
        close();
        open_label = label;
        open_start = toks[t].start;
      }
      open_end = toks[t].end;
    }
    close();
  }
}

// Alignment decoder shared by single_tag and multi_tag: walk the source text
// and the payload together, peeling markers at boundaries and matching
// (possibly escaped) literals in between.
void decode_tags(Dec& d, const std::string& body, const std::optional<std::string>& qtype) {
  const bool typed = !qtype.has_value();
  const std::size_t n = d.idx.scalars();
  struct Open {
    std::size_t pos;
    std::string label;
  };
  std::vector<Open> stack;
  std::size_t i = 0;  // byte cursor in body
  bool bailed = false;

  const auto literal_at = [&](std::size_t j) -> std::string {
    const std::string_view ch = d.idx.slice(j, j + 1);
    if (typed) {
      if (ch == "&") return "&amp;";
      if (ch == "<") return "&lt;";
      if (ch == ">") return "&gt;";
      return std::string(ch);
    }
    if (ch == "@" || ch == "#") {
      std::size_t lo = j, hi = j + 1;
      while (lo > 0 && d.idx.slice(lo - 1, lo) == ch) --lo;
      while (hi < n && d.idx.slice(hi, hi + 1) == ch) ++hi;
      if (hi - lo >= 2) return std::string(ch) + std::string(ch);
    }
    return std::string(ch);
  };

  // Marker handling at one boundary; returns true if it consumed something.
  const auto try_marker = [&](std::size_t j) -> bool {
    if (typed) {
      if (i >= body.size() || body[i] != '<') return false;
      const std::size_t gt = body.find('>', i);
      if (gt == std::string::npos || gt - i > 256) return false;
      std::string name = body.substr(i + 1, gt - i - 1);
      const bool closing = !name.empty() && name[0] == '/';
      if (closing) name.erase(0, 1);
      if (!d.known_type(name) || name.empty()) {
        // Prefer literal alignment for raw '<' in the text itself.
        if (j < n && d.idx.slice(j, j + 1) == "<") return false;
        d.diag(DiagKind::UNKNOWN_TYPE, "unknown tag '" + body.substr(i, gt - i + 1) + "'",
               "offset " + std::to_string(j));
        i = gt + 1;
        return true;
      }
      if (closing) {
        // Pop the most recent open of this type.
        auto it = std::find_if(stack.rbegin(), stack.rend(),
                               [&](const Open& o) { return o.label == name; });
        if (it == stack.rend()) {
          d.diag(DiagKind::MALFORMED_STRUCTURE, "unmatched </" + name + ">",
                 "offset " + std::to_string(j));
        } else {
          d.add(name, {{it->pos, j}}, "offset " + std::to_string(j));
          stack.erase(std::next(it).base());
        }
      } else {
        stack.push_back({j, name});
      }
      i = gt + 1;
      return true;
    }

    // Untyped @@/## markers: surplus beyond the escaped literal run.
    if (i >= body.size() || (body[i] != '@' && body[i] != '#')) return false;
    const char c = body[i];
    std::size_t run = 0;
    while (i + run < body.size() && body[i + run] == c) ++run;
    // Bytes the source itself will consume for its own run of c at j.
    std::size_t expected = 0;
    std::size_t jj = j;
    const std::string ch(1, c);
    std::size_t src_run = 0;
    while (jj < n && d.idx.slice(jj, jj + 1) == ch) {
      ++src_run;
      ++jj;
    }
    if (src_run > 0) expected = src_run >= 2 ? 2 * src_run : 1;
    if (run <= expected) return false;
    std::size_t surplus = run - expected;
    if (surplus < 2) return false;
    surplus -= surplus % 2;
    for (std::size_t m = 0; m < surplus / 2; ++m) {
      if (c == '@') {
        stack.push_back({j, *qtype});
      } else {
        if (stack.empty()) {
          d.diag(DiagKind::MALFORMED_STRUCTURE, "## without a matching @@",
                 "offset " + std::to_string(j));
        } else {
          d.add(stack.back().label, {{stack.back().pos, j}}, "offset " + std::to_string(j));
          stack.pop_back();
        }
      }
    }
    i += surplus;
    return true;
  };

  for (std::size_t j = 0; j <= n; ++j) {
    while (try_marker(j)) {
    }
    if (j == n) break;
    const std::string expect = literal_at(j);
    const std::string_view raw = d.idx.slice(j, j + 1);
    if (body.compare(i, expect.size(), expect) == 0) {
      i += expect.size();
    } else if (body.compare(i, raw.size(), raw) == 0) {
      i += raw.size();
    } else {
      d.diag(DiagKind::MALFORMED_STRUCTURE,
             "payload diverges from the text at offset " + std::to_string(j),
             "offset " + std::to_string(j));
      bailed = true;
      break;
    }
  }
  if (!bailed) {
    for (const auto& o : stack)
      d.diag(DiagKind::MALFORMED_STRUCTURE,
             (typed ? "<" + o.label + ">" : std::string("@@")) + " never closed",
             "offset " + std::to_string(o.pos));
  }
}

}  // namespace

ParseResult decode(const std::string& output, const std::string& text, FormatId f,
                   const std::optional<std::string>& queried_type,
                   const std::vector<std::string>& inventory) {
  const FormatTraits& traits = traits_of(f);
  if (traits.arity == Arity::per_type && !queried_type)
    throw Error("decoding " + std::string(format_name(f)) + " requires the queried type");

  Dec d(text, inventory);
  const std::string body = preprocess(output);
  switch (f) {
    case FormatId::conv_term:
    case FormatId::single_term:
      decode_term_list(d, body, *queried_type);
      break;
    case FormatId::multi_term:
      decode_multi_term(d, body);
      break;
    case FormatId::single_span:
      decode_single_span(d, body, *queried_type);
      break;
    case FormatId::multi_span:
      decode_multi_span(d, body);
      break;
    case FormatId::multi_triple:
      decode_triples(d, body);
      break;
    case FormatId::single_code:
      decode_code(d, body, queried_type);
      break;
    case FormatId::multi_code:
      decode_code(d, body, std::nullopt);
      break;
    case FormatId::multi_brat:
      decode_brat(d, body);
      break;
    case FormatId::multi_bio:
      decode_bio(d, body);
      break;
    case FormatId::single_tag:
      decode_tags(d, body, queried_type);
      break;
    case FormatId::multi_tag:
      decode_tags(d, body, std::nullopt);
      break;
  }
  return d.finish();
}

}  // namespace gner
