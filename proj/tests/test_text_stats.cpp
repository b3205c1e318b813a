#include <gtest/gtest.h>

#include "rgk/synth.hpp"
#include "rgk/text_stats.hpp"

TEST(Syllables, VowelGroupsWithSilentE) {
  EXPECT_EQ(rgk::count_syllables("cat"), 1);
  EXPECT_EQ(rgk::count_syllables("table"), 2);
  EXPECT_EQ(rgk::count_syllables("make"), 1);
  EXPECT_EQ(rgk::count_syllables("the"), 1);
  EXPECT_EQ(rgk::count_syllables("beautiful"), 3);
  EXPECT_EQ(rgk::count_syllables("rhythm"), 1);
  EXPECT_EQ(rgk::count_syllables("xyz"), 1);
  EXPECT_EQ(rgk::count_syllables("bcd"), 1);
  EXPECT_EQ(rgk::count_syllables("victorian"), 3);
  EXPECT_TRUE(rgk::is_complex_word("elegant"));
  EXPECT_FALSE(rgk::is_complex_word("wooden"));
}

TEST(Sentences, CountsTerminatedRuns) {
  EXPECT_EQ(rgk::count_sentences("a red apple"), 1u);
  EXPECT_EQ(rgk::count_sentences("A dog. A cat! Really?"), 3u);
  EXPECT_EQ(rgk::count_sentences("Wait... what"), 2u);
  EXPECT_EQ(rgk::count_sentences(""), 1u);
}

TEST(Fog, TenMonosyllablesInOneSentenceIsFour) {
  EXPECT_EQ(rgk::gunning_fog("the big red dog sat on a mat by me"), 4.0);
}

TEST(Fog, FormulaWithComplexWords) {
  // 5 words, 1 sentence, 2 complex: 0.4 * (5 + 40) = 18.
  EXPECT_DOUBLE_EQ(rgk::gunning_fog("an elegant and beautiful vase"), 18.0);
  // 6 words in 2 sentences, none complex: 0.4 * 3 = 1.2.
  EXPECT_DOUBLE_EQ(rgk::gunning_fog("A dog sits. It is brown."), 1.2);
  EXPECT_EQ(rgk::gunning_fog("..."), 0.0);
}

TEST(Buckets, LengthBoundaries) {
  EXPECT_EQ(rgk::length_bucket(1), rgk::LengthBucket::phrase);
  EXPECT_EQ(rgk::length_bucket(8), rgk::LengthBucket::phrase);
  EXPECT_EQ(rgk::length_bucket(9), rgk::LengthBucket::short_sentence);
  EXPECT_EQ(rgk::length_bucket(15), rgk::LengthBucket::short_sentence);
  EXPECT_EQ(rgk::length_bucket(16), rgk::LengthBucket::long_sentence);
}

TEST(Buckets, ComplexityBoundaries) {
  EXPECT_EQ(rgk::complexity_bucket(4.0), rgk::Complexity::easy);
  EXPECT_EQ(rgk::complexity_bucket(std::nextafter(4.0, 5.0)), rgk::Complexity::medium);
  EXPECT_EQ(rgk::complexity_bucket(8.0), rgk::Complexity::medium);
  EXPECT_EQ(rgk::complexity_bucket(std::nextafter(8.0, 9.0)), rgk::Complexity::hard);
}

TEST(Buckets, DescriptionEndToEnd) {
  const auto b = rgk::bucket_description("the big red dog sat on a mat by me");
  EXPECT_EQ(b.words, 10u);
  EXPECT_EQ(b.complexity, rgk::Complexity::easy);
  EXPECT_EQ(b.length, rgk::LengthBucket::short_sentence);
}

TEST(Buckets, DefaultVocabularyCoversAllNine) {
  std::set<std::pair<rgk::Complexity, rgk::LengthBucket>> seen;
  for (const auto& b : rgk::bucket_descriptions(rgk::default_vocabulary())) {
    seen.insert({b.complexity, b.length});
  }
  EXPECT_EQ(seen.size(), 9u);
}

TEST(Stats, CorpusMeans) {
  const std::vector<std::string> labels = {"a red apple", "the dog and the cat"};
  const auto s = rgk::text_stats(labels);
  EXPECT_EQ(s.samples, 2u);
  EXPECT_DOUBLE_EQ(s.average_length, 4.0);
  EXPECT_DOUBLE_EQ(s.unique_words_per_sample, (3.0 + 4.0) / 2.0);
  EXPECT_DOUBLE_EQ(s.gunning_fog, (0.4 * 3 + 0.4 * 5) / 2.0);
  EXPECT_EQ(rgk::text_stats({}).samples, 0u);
}
