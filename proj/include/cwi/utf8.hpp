#ifndef CWI_UTF8_HPP
#define CWI_UTF8_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace cwi::utf8 {

struct Decoded {
  char32_t codepoint;
  std::size_t length;  // bytes consumed, >= 1
  bool valid;          // false for malformed sequences (length is then 1)
};

// Decodes the code point starting at byte `pos`; pos < text.size().
Decoded decode(std::string_view text, std::size_t pos);

// Byte offset of the `index`-th code point, or nullopt if out of range.
// index == number of code points maps to text.size().
std::optional<std::size_t> byte_offset_of_codepoint(std::string_view text,
                                                    std::size_t index);

// Lowercases ASCII, Latin-1 and Latin Extended-A letters; other code points
// and malformed bytes are copied unchanged.
std::string to_lower(std::string_view text);

}  // namespace cwi::utf8

#endif  // CWI_UTF8_HPP
