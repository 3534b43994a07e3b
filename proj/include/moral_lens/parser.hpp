#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace moral_lens {

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ParsedOpinion {
  int label = 0;  // 1..4 on the PCT scale
  std::string reason;
  ByteRange raw_span;  // the JSON object the answer was read from
};

/// Lowercase phrases that mark a completion as a refusal.
std::vector<std::string> default_refusal_phrases();

struct ParserOptions {
  std::vector<std::string> refusal_phrases = default_refusal_phrases();
};

/// Maps one Opinion token ("3)", "3", "Agree", "3) Agree", ...) onto 1..4.
/// Throws AmbiguousLabelError when the token names no label or two labels.
int parse_opinion_label(std::string_view token);

/// Reads the first fenced or bare JSON object carrying both "Opinion" and
/// "Brief Reason". Every failure is a ParseError subtype (NoJsonError,
/// MissingKeyError, AmbiguousLabelError, RefusalDetected).
ParsedOpinion parse_response(std::string_view raw, const ParserOptions& options = {});

/// Reads {"rating": k} with k an integer in 1..5. Out-of-range values raise
/// RatingRangeError; nothing is clamped.
int parse_judge_rating(std::string_view raw);

}  // namespace moral_lens
