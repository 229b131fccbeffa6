#include <gtest/gtest.h>

#include "mmforge/rouge.hpp"
#include "oracles.hpp"

namespace mmforge {
namespace {

using rouge::TokenMode;

TEST(Rouge, SubsequenceExample) {
  const auto r = rouge::rouge_l("ACE", "ABCDE");
  EXPECT_NEAR(r.precision, 1.0, 1e-12);
  EXPECT_NEAR(r.recall, 0.6, 1e-12);
  EXPECT_NEAR(r.f, 0.75, 1e-12);
}

TEST(Rouge, IdentityAndDisjoint) {
  EXPECT_NEAR(rouge::rouge_l("白い車", "白い車").f, 1.0, 1e-12);
  const auto d = rouge::rouge_l("abc", "xyz");
  EXPECT_EQ(d.precision, 0.0);
  EXPECT_EQ(d.recall, 0.0);
  EXPECT_EQ(d.f, 0.0);
}

TEST(Rouge, EmptyCandidateScoresZero) {
  const auto r = rouge::rouge_l("", "白色");
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f, 0.0);
}

TEST(Rouge, InvalidInputsThrow) {
  EXPECT_THROW(rouge::rouge_l("a", ""), std::invalid_argument);
  EXPECT_THROW(rouge::rouge_l("a", "   "), std::invalid_argument);
  EXPECT_THROW(rouge::rouge_l(std::string(rouge::kMaxTokens + 1, 'a'), "a"), std::invalid_argument);
  EXPECT_THROW(rouge::parse_mode("bytes"), std::invalid_argument);
}

TEST(Rouge, CharacterModeIgnoresWhitespace) {
  EXPECT_EQ(rouge::tokenize("車は 白い", TokenMode::character),
            (std::vector<std::string>{"車", "は", "白", "い"}));
  EXPECT_EQ(rouge::tokenize(" 車は  白い です。", TokenMode::whitespace),
            (std::vector<std::string>{"車は", "白い", "です。"}));
}

TEST(Rouge, WordModeGivesNoCreditForPartialWords) {
  // A verbose answer containing the reference as a standalone word scores;
  // answers that only share characters do not.
  EXPECT_GT(rouge::rouge_l("車は 白色 です。", "白色", TokenMode::whitespace).f, 0.0);
  EXPECT_EQ(rouge::rouge_l("車は白い です。", "白色", TokenMode::whitespace).f, 0.0);
  EXPECT_EQ(rouge::rouge_l("車は白色です。", "白色", TokenMode::whitespace).f, 0.0);
  EXPECT_GT(rouge::rouge_l("車は白色です。", "白色", TokenMode::character).f, 0.0);
}

TEST(Rouge, BetaWeightsRecall) {
  const auto r = rouge::rouge_l("AC", "ABCD", TokenMode::character, 2.0);
  const double p = 1.0, rec = 0.5, b2 = 4.0;
  EXPECT_NEAR(r.f, (1 + b2) * p * rec / (rec + b2 * p), 1e-12);
}

TEST(Rouge, LcsMatchesBruteForce) {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const auto a = rouge::tokenize(testing::random_ascii(rng, rng.below(12), "abcd"), TokenMode::character);
    const auto b = rouge::tokenize(testing::random_ascii(rng, rng.below(12), "abcd"), TokenMode::character);
    ASSERT_EQ(rouge::lcs_length(a, b), testing::brute_force_lcs(a, b));
  }
}

TEST(Rouge, AppendingReferenceTokenNeverLowersRecall) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const std::string ref = testing::random_ascii(rng, 1 + rng.below(15));
    const std::string cand = testing::random_ascii(rng, rng.below(15));
    const std::string extra(1, ref[rng.below(ref.size())]);
    const auto before = rouge::rouge_l(cand, ref);
    const auto after = rouge::rouge_l(cand + extra, ref);
    ASSERT_GE(after.recall, before.recall - 1e-12) << cand << " / " << ref;
    ASSERT_GE(after.f, 0.0);
    ASSERT_LE(after.f, 1.0);
  }
}

}  // namespace
}  // namespace mmforge
