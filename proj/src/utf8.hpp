#pragma once

// Minimal UTF-8 decoding; malformed bytes are passed through one at a time
// as kInvalid so that no input byte is ever lost.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace latinav::utf8 {

inline constexpr char32_t kInvalid = 0xFFFFFFFF;

/// Length of the sequence starting at `s[i]`, or 0 if malformed.
inline std::size_t sequence_length(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (b < 0x80) return 1;
  if ((b & 0xE0) == 0xC0) len = 2;
  else if ((b & 0xF0) == 0xE0) len = 3;
  else if ((b & 0xF8) == 0xF0) len = 4;
  else return 0;
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
  }
  return len;
}

inline char32_t decode(std::string_view seq) {
  const auto b0 = static_cast<unsigned char>(seq[0]);
  switch (seq.size()) {
    case 1: return b0;
    case 2: return (char32_t(b0 & 0x1F) << 6) | (seq[1] & 0x3F);
    case 3: return (char32_t(b0 & 0x0F) << 12) | (char32_t(seq[1] & 0x3F) << 6) | (seq[2] & 0x3F);
    default:
      return (char32_t(b0 & 0x07) << 18) | (char32_t(seq[1] & 0x3F) << 12) |
             (char32_t(seq[2] & 0x3F) << 6) | (seq[3] & 0x3F);
  }
}

/// Calls f(code_point, raw_bytes) for every code point of `s`.
template <typename F>
void for_each(std::string_view s, F&& f) {
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t len = sequence_length(s, i);
    if (len == 0) {
      f(kInvalid, s.substr(i, 1));
      ++i;
    } else {
      f(decode(s.substr(i, len)), s.substr(i, len));
      i += len;
    }
  }
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// Byte offsets of code point starts, plus a final entry equal to s.size().
inline std::vector<std::size_t> boundaries(std::string_view s) {
  std::vector<std::size_t> b;
  b.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    b.push_back(i);
    const std::size_t len = sequence_length(s, i);
    i += len == 0 ? 1 : len;
  }
  b.push_back(s.size());
  return b;
}

inline std::size_t length(std::string_view s) { return boundaries(s).size() - 1; }

}  // namespace latinav::utf8
