#include <string_view>
#include <vector>

#include "cwi/corpus.hpp"
#include "cwi/utf8.hpp"

namespace cwi {

namespace {

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f' || c == 0xA0;
}

bool is_hyphen(char32_t c) { return c == '-' || c == 0x2010; }

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1:  // inverted exclamation mark
    case 0xAB:  // left guillemet
    case 0xB7:  // middle dot
    case 0xBB:  // right guillemet
    case 0xBF:  // inverted question mark
      return true;
    default:
      break;
  }
  // General punctuation block: dashes, quotes, ellipsis, per-mille...
  return c >= 0x2010 && c <= 0x205E;
}

struct Char {
  char32_t cp;
  std::size_t start;
  std::size_t end;
};

}  // namespace

std::vector<Token> tokenize(std::string_view sentence) {
  std::vector<Char> chars;
  for (std::size_t pos = 0; pos < sentence.size();) {
    const utf8::Decoded d = utf8::decode(sentence, pos);
    chars.push_back({d.codepoint, pos, pos + d.length});
    pos += d.length;
  }
  const auto is_word = [&](std::size_t i) {
    return i < chars.size() && !is_space(chars[i].cp) && !is_punct(chars[i].cp);
  };

  std::vector<Token> tokens;
  const auto emit = [&](std::size_t start, std::size_t end) {
    tokens.push_back({std::string(sentence.substr(start, end - start)), start, end});
  };

  std::size_t i = 0;
  while (i < chars.size()) {
    if (is_space(chars[i].cp)) {
      ++i;
      continue;
    }
    if (is_punct(chars[i].cp)) {
      emit(chars[i].start, chars[i].end);
      ++i;
      continue;
    }
    const std::size_t first = i;
    while (true) {
      if (is_word(i)) {
        ++i;
      } else if (i < chars.size() && is_hyphen(chars[i].cp) && i > first &&
                 is_word(i + 1)) {
        ++i;  // inner hyphen of a compound
      } else {
        break;
      }
    }
    emit(chars[first].start, chars[i - 1].end);
  }
  return tokens;
}

}  // namespace cwi
