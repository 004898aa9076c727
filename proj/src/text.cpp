#include "gner/text.hpp"

#include <stdexcept>

namespace gner {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t utf8_seq_len(unsigned char c) {
  if (c < 0x80) return 1;
  if ((c & 0xe0) == 0xc0) return 2;
  if ((c & 0xf0) == 0xe0) return 3;
  if ((c & 0xf8) == 0xf0) return 4;
  return 1;  // stray continuation / invalid lead: one scalar per byte
}

std::size_t scalar_length(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text.size(); i += utf8_seq_len(static_cast<unsigned char>(text[i]))) ++n;
  return n;
}

TextIndex::TextIndex(std::string_view text) : text_(text) {
  for (char c : text) {
    if (static_cast<unsigned char>(c) >= 0x80) {
      ascii_ = false;
      break;
    }
  }
  if (ascii_) {
    scalars_ = text.size();
    return;
  }
  byte_of_scalar_.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size();
       i += utf8_seq_len(static_cast<unsigned char>(text[i]))) {
    byte_of_scalar_.push_back(static_cast<std::uint32_t>(i));
  }
  byte_of_scalar_.push_back(static_cast<std::uint32_t>(text.size()));
  scalars_ = byte_of_scalar_.size() - 1;
}

std::size_t TextIndex::byte_of(std::size_t scalar) const {
  if (scalar > scalars_) throw std::out_of_range("scalar index past end of text");
  return ascii_ ? scalar : byte_of_scalar_[scalar];
}

std::string_view TextIndex::slice(std::size_t start, std::size_t end) const {
  if (start > end) throw std::out_of_range("inverted scalar range");
  const std::size_t b0 = byte_of(start), b1 = byte_of(end);
  return text_.substr(b0, b1 - b0);
}

std::optional<std::size_t> TextIndex::find(std::string_view needle,
                                           std::size_t from_scalar) const {
  if (from_scalar > scalars_) return std::nullopt;
  const std::size_t pos = text_.find(needle, byte_of(from_scalar));
  if (pos == std::string_view::npos) return std::nullopt;
  if (ascii_) return pos;
  // Binary search the scalar whose byte offset is pos. A valid UTF-8 needle
  // always matches at a boundary, so the lookup is exact.
  std::size_t lo = 0, hi = scalars_;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (byte_of_scalar_[mid] < pos)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

std::vector<TokenSpan> TextIndex::tokens() const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  const std::size_t n = scalars_;
  while (i < n) {
    while (i < n && is_ascii_space(text_[byte_of(i)])) ++i;
    if (i >= n) break;
    const std::size_t start = i;
    while (i < n && !is_ascii_space(text_[byte_of(i)])) ++i;
    out.push_back({start, i});
  }
  return out;
}

}  // namespace gner
