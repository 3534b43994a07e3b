#include <gtest/gtest.h>

#include <random>
#include <string>

#include "moral_lens/errors.hpp"
#include "moral_lens/parser.hpp"
#include "moral_lens/types.hpp"

using namespace moral_lens;

namespace {

std::string fenced(const std::string& opinion, const std::string& reason) {
  return "```json\n{\n  \"Opinion\": \"" + opinion + "\",\n  \"Brief Reason\": \"" + reason + "\"\n}\n```";
}

// Every spelling a label may canonically take.
std::vector<std::pair<std::string, int>> canonical_spellings() {
  std::vector<std::pair<std::string, int>> out;
  for (int k = 1; k <= 4; ++k) {
    const std::string word(kPctOptionLabels[k - 1]);
    out.emplace_back(std::to_string(k) + ")", k);
    out.emplace_back(std::to_string(k), k);
    out.emplace_back(word, k);
    out.emplace_back(std::to_string(k) + ") " + word, k);
  }
  return out;
}

std::string random_reason(std::mt19937_64& rng) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,.;:!?'()-";
  std::uniform_int_distribution<std::size_t> len(1, 80);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
  s[0] = 'R';
  s.back() = '.';
  return s;
}

}  // namespace

TEST(Parser, CanonicalSpellingsRoundTrip) {
  std::mt19937_64 rng(11);
  for (const auto& [token, label] : canonical_spellings()) {
    EXPECT_EQ(parse_opinion_label(token), label) << token;
    for (int i = 0; i < 25; ++i) {
      const auto reason = random_reason(rng);
      const auto raw = fenced(token, reason);
      const auto parsed = parse_response(raw);
      EXPECT_EQ(parsed.label, label);
      EXPECT_EQ(parsed.reason, reason);
      EXPECT_EQ(raw.substr(parsed.raw_span.begin, 1), "{");
      EXPECT_EQ(raw.substr(parsed.raw_span.end - 1, 1), "}");
    }
  }
}

TEST(Parser, LabelVariants) {
  EXPECT_EQ(parse_opinion_label("  3)  agree "), 3);
  EXPECT_EQ(parse_opinion_label("STRONGLY DISAGREE"), 1);
  EXPECT_EQ(parse_opinion_label("(2)"), 2);
  EXPECT_EQ(parse_opinion_label("4."), 4);
  EXPECT_THROW(parse_opinion_label("2) Agree"), AmbiguousLabelError);
  EXPECT_THROW(parse_opinion_label("5)"), AmbiguousLabelError);
  EXPECT_THROW(parse_opinion_label("Neutral"), AmbiguousLabelError);
  EXPECT_THROW(parse_opinion_label(""), AmbiguousLabelError);
  EXPECT_THROW(parse_opinion_label("12"), AmbiguousLabelError);
}

TEST(Parser, BareJsonAndSurroundingProse) {
  const auto p = parse_response("Sure, here it is: {\"Opinion\": \"1)\", \"Brief Reason\": \"No.\"} thanks");
  EXPECT_EQ(p.label, 1);
  EXPECT_EQ(p.reason, "No.");
}

TEST(Parser, IntegerOpinionAndKeySpelling) {
  EXPECT_EQ(parse_response(R"j({"opinion": 4, "brief_reason": "x"})j").label, 4);
  EXPECT_THROW(parse_response(R"j({"Opinion": 0, "Brief Reason": "x"})j"), AmbiguousLabelError);
}

TEST(Parser, FirstMatchingObjectWins) {
  const std::string raw =
      R"j({"note": "preamble"} {"Opinion": "2)", "Brief Reason": "first"} {"Opinion": "3)", "Brief Reason": "second"})j";
  const auto p = parse_response(raw);
  EXPECT_EQ(p.label, 2);
  EXPECT_EQ(p.reason, "first");
}

TEST(Parser, BracesInsideStrings) {
  const auto p = parse_response(R"j({"Opinion": "3)", "Brief Reason": "Sets like {a, b} are fine."})j");
  EXPECT_EQ(p.reason, "Sets like {a, b} are fine.");
}

TEST(Parser, TypedFailures) {
  EXPECT_THROW(parse_response("no json here"), NoJsonError);
  EXPECT_THROW(parse_response(""), NoJsonError);
  EXPECT_THROW(parse_response(R"j({"Opinion": "3)"})j"), MissingKeyError);
  EXPECT_THROW(parse_response(R"j({"Opinion": "3)", "Brief Reason": "   "})j"), MissingKeyError);
  EXPECT_THROW(parse_response(R"j({"Opinion": "3)", "Brief Reason": 7})j"), MissingKeyError);
  EXPECT_THROW(parse_response(fenced("maybe", "x")), AmbiguousLabelError);
  EXPECT_THROW(parse_response("I'm sorry, but I can't share opinions on this."), RefusalDetected);
  EXPECT_THROW(parse_response(fenced("As an AI I do not take sides", "x")), RefusalDetected);
}

TEST(Parser, CustomRefusalPhrases) {
  ParserOptions opts;
  opts.refusal_phrases = {"pass on this"};
  EXPECT_THROW(parse_response("I'll pass on this one", opts), RefusalDetected);
  EXPECT_THROW(parse_response("I'm sorry", opts), NoJsonError);
}

TEST(Parser, JudgeRating) {
  EXPECT_EQ(parse_judge_rating("```json\n{\"rating\": 4}\n```"), 4);
  EXPECT_EQ(parse_judge_rating(R"j({"Rating": "5"})j"), 5);
  EXPECT_EQ(parse_judge_rating(R"j({"rating": 3.0})j"), 3);
  EXPECT_THROW(parse_judge_rating(R"j({"rating": 6})j"), RatingRangeError);
  EXPECT_THROW(parse_judge_rating(R"j({"rating": 0})j"), RatingRangeError);
  EXPECT_THROW(parse_judge_rating(R"j({"rating": 2.5})j"), RatingRangeError);
  EXPECT_THROW(parse_judge_rating(R"j({"rating": "high"})j"), RatingRangeError);
  EXPECT_THROW(parse_judge_rating(R"j({"score": 3})j"), MissingKeyError);
  EXPECT_THROW(parse_judge_rating("4"), NoJsonError);
}

TEST(Parser, FuzzedBytesRaiseTypedErrorsOnly) {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> len(0, 300);
  // Biased alphabet so braces, quotes and key fragments show up often.
  static const std::vector<std::string> pieces = {
      "{", "}", "\"", ":", ",", "Opinion", "Brief Reason", "rating", "1)", "4) Strongly agree",
      "```json", "\\", "[", "]", "I'm sorry", "null", "3"};
  std::uniform_int_distribution<std::size_t> piece(0, pieces.size() - 1);
  std::bernoulli_distribution use_piece(0.5);
  int ok = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const auto n = len(rng);
    while (s.size() < n) {
      if (use_piece(rng)) s += pieces[piece(rng)];
      else s.push_back(static_cast<char>(byte(rng)));
    }
    try {
      const auto p = parse_response(s);
      ASSERT_GE(p.label, 1);
      ASSERT_LE(p.label, 4);
      ASSERT_FALSE(p.reason.empty());
      ++ok;
    } catch (const ParseError&) {
    }
    try {
      const int r = parse_judge_rating(s);
      ASSERT_GE(r, 1);
      ASSERT_LE(r, 5);
    } catch (const ParseError&) {
    }
  }
  SUCCEED() << ok << " fuzz inputs parsed";
}
