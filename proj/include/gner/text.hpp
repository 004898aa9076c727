#pragma once

// UTF-8 text with Unicode-scalar indexing. All entity offsets in this
// codebase count scalar values, never bytes; TextIndex is the one place that
// maps between the two.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gner {

// Number of bytes in the UTF-8 sequence starting with byte c (1 for invalid
// lead bytes, which are treated as one scalar each so indexing stays total).
std::size_t utf8_seq_len(unsigned char c);

// Scalar count of a UTF-8 string.
std::size_t scalar_length(std::string_view text);

struct TokenSpan {
  std::size_t start = 0;  // scalar offsets, half-open
  std::size_t end = 0;
};

// Immutable scalar-indexed view over one text. Does not own the bytes; keep
// the backing string alive while using it.
class TextIndex {
 public:
  explicit TextIndex(std::string_view text);

  std::size_t scalars() const { return scalars_; }
  std::string_view bytes() const { return text_; }

  // Byte offset of scalar i, for i in [0, scalars()].
  std::size_t byte_of(std::size_t scalar) const;

  // Bytes covered by the half-open scalar range [start, end).
  std::string_view slice(std::size_t start, std::size_t end) const;

  // Scalar index of the first occurrence of needle at or after from_scalar.
  // A valid UTF-8 needle can only match on scalar boundaries.
  std::optional<std::size_t> find(std::string_view needle, std::size_t from_scalar) const;

  // Whitespace tokenization (space, tab, newline, CR, FF, VT), scalar spans.
  std::vector<TokenSpan> tokens() const;

 private:
  std::string_view text_;
  std::size_t scalars_ = 0;
  bool ascii_ = true;
  std::vector<std::uint32_t> byte_of_scalar_;  // filled only when !ascii_
};

bool is_ascii_space(char c);

}  // namespace gner
