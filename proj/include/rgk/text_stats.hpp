#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rgk/text.hpp"

namespace rgk {

namespace detail {

inline bool is_vowel(char c) {
  switch (c) {
    case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
    default: return false;
  }
}

}  // namespace detail

/// Vowel-group syllable estimate for a lowercase word. A trailing silent
/// "e" is discounted except in consonant + "le" endings ("table"). Never
/// less than one.
inline int count_syllables(std::string_view word) {
  int groups = 0;
  bool in_group = false;
  for (char c : word) {
    const bool v = detail::is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const auto n = word.size();
  if (groups > 1 && n >= 2 && word[n - 1] == 'e' && !detail::is_vowel(word[n - 2])) {
    const bool consonant_le = n >= 3 && word[n - 2] == 'l' && !detail::is_vowel(word[n - 3]);
    if (!consonant_le) --groups;
  }
  return groups < 1 ? 1 : groups;
}

inline bool is_complex_word(std::string_view word) { return count_syllables(word) >= 3; }

/// Sentences are runs of text ended by '.', '!' or '?' that contain at
/// least one word; never fewer than one.
inline std::size_t count_sentences(std::string_view text) {
  std::size_t sentences = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?') {
      if (!tokenize(text.substr(start, i - start)).empty()) ++sentences;
      start = i + 1;
    }
  }
  return sentences == 0 ? 1 : sentences;
}

/// 0.4 * (words / sentences + 100 * complex_words / words); 0 for text
/// without words.
inline double gunning_fog(std::string_view text) {
  const auto words = tokenize(text);
  if (words.empty()) return 0.0;
  std::size_t complex = 0;
  for (const auto& w : words) complex += is_complex_word(w) ? 1 : 0;
  const double n = static_cast<double>(words.size());
  return 0.4 * (n / static_cast<double>(count_sentences(text)) +
                100.0 * static_cast<double>(complex) / n);
}

struct TextStats {
  double average_length = 0.0;
  double gunning_fog = 0.0;
  double unique_words_per_sample = 0.0;
  std::size_t samples = 0;
};

/// Corpus means of word count, Gunning Fog and distinct words, one sample
/// per label.
inline TextStats text_stats(std::span<const std::string> labels) {
  TextStats s;
  s.samples = labels.size();
  if (labels.empty()) return s;
  for (const auto& label : labels) {
    const auto words = tokenize(label);
    s.average_length += static_cast<double>(words.size());
    s.gunning_fog += gunning_fog(label);
    s.unique_words_per_sample +=
        static_cast<double>(std::set<std::string>(words.begin(), words.end()).size());
  }
  const double n = static_cast<double>(labels.size());
  s.average_length /= n;
  s.gunning_fog /= n;
  s.unique_words_per_sample /= n;
  return s;
}

enum class Complexity { easy, medium, hard };
enum class LengthBucket { phrase, short_sentence, long_sentence };

inline std::string_view complexity_name(Complexity c) {
  switch (c) {
    case Complexity::easy: return "easy";
    case Complexity::medium: return "medium";
    case Complexity::hard: return "hard";
  }
  return "";
}

inline std::string_view length_bucket_name(LengthBucket b) {
  switch (b) {
    case LengthBucket::phrase: return "phrase";
    case LengthBucket::short_sentence: return "short";
    case LengthBucket::long_sentence: return "long";
  }
  return "";
}

/// fog <= 4 easy, fog <= 8 medium, above that hard.
inline Complexity complexity_bucket(double fog) {
  if (fog <= 4.0) return Complexity::easy;
  if (fog <= 8.0) return Complexity::medium;
  return Complexity::hard;
}

/// <= 8 words phrase, <= 15 short sentence, otherwise long sentence.
inline LengthBucket length_bucket(std::size_t words) {
  if (words <= 8) return LengthBucket::phrase;
  if (words <= 15) return LengthBucket::short_sentence;
  return LengthBucket::long_sentence;
}

struct DescriptionBuckets {
  std::size_t words = 0;
  double fog = 0.0;
  Complexity complexity = Complexity::easy;
  LengthBucket length = LengthBucket::phrase;
};

inline DescriptionBuckets bucket_description(std::string_view label) {
  DescriptionBuckets b;
  b.words = tokenize(label).size();
  b.fog = gunning_fog(label);
  b.complexity = complexity_bucket(b.fog);
  b.length = length_bucket(b.words);
  return b;
}

inline std::vector<DescriptionBuckets> bucket_descriptions(std::span<const std::string> labels) {
  std::vector<DescriptionBuckets> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(bucket_description(l));
  return out;
}

}  // namespace rgk
