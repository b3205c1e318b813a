#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace rgk {

/// Lowercases ASCII and splits on whitespace and punctuation, which is
/// dropped. Bytes outside ASCII are kept as part of words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char ch : text) {
    const bool separator = ch < 0x80 && (std::isspace(ch) || std::ispunct(ch) || std::iscntrl(ch));
    if (separator) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(ch < 0x80 ? std::tolower(ch) : ch));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.append(sep);
    out.append(words[i]);
  }
  return out;
}

}  // namespace rgk
