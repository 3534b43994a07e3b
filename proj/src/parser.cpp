#include "moral_lens/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/types.hpp"

namespace moral_lens {

using nlohmann::json;

namespace {

struct JsonObject {
  json value;
  ByteRange span;
};

// End (exclusive) of the balanced {...} starting at `open`, honouring JSON
// string literals, or npos when the braces never balance.
std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

// Visits every parseable JSON object in the text in order of its opening
// brace (nested objects included). Stops when `visit` returns true.
template <class Visit>
bool for_each_object(std::string_view text, Visit&& visit) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    const std::size_t end = balanced_end(text, pos);
    if (end == std::string_view::npos) continue;
    json parsed = json::parse(text.substr(pos, end - pos), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    if (visit(JsonObject{std::move(parsed), {pos, end}})) return true;
  }
  return false;
}

std::string normalize_key(std::string_view key) {
  std::string out;
  for (unsigned char c : key) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

const json* find_key(const json& object, std::string_view normalized) {
  for (auto it = object.begin(); it != object.end(); ++it) {
    if (normalize_key(it.key()) == normalized) return &it.value();
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower_collapsed(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : trim(s)) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<int> word_label(std::string_view word) {
  for (std::size_t i = 0; i < kPctOptionLabels.size(); ++i) {
    if (word == lower_collapsed(kPctOptionLabels[i])) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

bool mentions_refusal(std::string_view text, const std::vector<std::string>& phrases) {
  const std::string lowered = lower_collapsed(text);
  return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
    return !p.empty() && lowered.find(p) != std::string::npos;
  });
}

}  // namespace

std::vector<std::string> default_refusal_phrases() {
  return {"i cannot", "i can't", "i can’t", "i'm sorry", "i am sorry", "as an ai",
          "i won't", "i will not", "unable to comply", "i must decline",
          "i'm not able to", "i am not able to", "i do not have personal opinions",
          "i don't have personal opinions"};
}

int parse_opinion_label(std::string_view token) {
  std::string s = lower_collapsed(token);
  if (!s.empty() && s.front() == '(') s.erase(0, 1);
  while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
  if (s.empty()) throw AmbiguousLabelError("empty Opinion label");

  std::optional<int> digit;
  std::string rest = s;
  if (s[0] >= '1' && s[0] <= '4' && (s.size() == 1 || !std::isdigit(static_cast<unsigned char>(s[1])))) {
    digit = s[0] - '0';
    std::size_t i = 1;
    if (i < s.size() && s[i] == ')') ++i;
    while (i < s.size() && (s[i] == ' ' || s[i] == '.' || s[i] == ':' || s[i] == '-')) ++i;
    rest = s.substr(i);
  }
  if (rest.empty()) {
    if (digit) return *digit;
    throw AmbiguousLabelError("Opinion label '" + std::string(token) + "' names no option");
  }
  const auto word = word_label(rest);
  if (!word) throw AmbiguousLabelError("Opinion label '" + std::string(token) + "' names no option");
  if (digit && *digit != *word) {
    throw AmbiguousLabelError("Opinion label '" + std::string(token) + "' names two different options");
  }
  return *word;
}

ParsedOpinion parse_response(std::string_view raw, const ParserOptions& options) {
  std::optional<JsonObject> hit;
  bool saw_object = false;
  for_each_object(raw, [&](JsonObject obj) {
    saw_object = true;
    if (find_key(obj.value, "opinion") != nullptr && find_key(obj.value, "briefreason") != nullptr) {
      hit = std::move(obj);
      return true;
    }
    return false;
  });

  if (!hit) {
    if (mentions_refusal(raw, options.refusal_phrases)) {
      throw RefusalDetected("completion reads as a refusal");
    }
    if (saw_object) throw MissingKeyError("no JSON object carries both \"Opinion\" and \"Brief Reason\"");
    throw NoJsonError("completion contains no JSON object");
  }

  const json& opinion = *find_key(hit->value, "opinion");
  const json& reason = *find_key(hit->value, "briefreason");

  ParsedOpinion out;
  out.raw_span = hit->span;
  try {
    if (opinion.is_number_integer()) {
      const auto v = opinion.get<long long>();
      if (v < 1 || v > 4) throw AmbiguousLabelError("Opinion " + std::to_string(v) + " outside 1..4");
      out.label = static_cast<int>(v);
    } else if (opinion.is_string()) {
      out.label = parse_opinion_label(opinion.get<std::string>());
    } else {
      throw AmbiguousLabelError("Opinion must be a string or integer");
    }
  } catch (const AmbiguousLabelError&) {
    if (opinion.is_string() && mentions_refusal(opinion.get<std::string>(), options.refusal_phrases)) {
      throw RefusalDetected("Opinion field reads as a refusal");
    }
    throw;
  }
  if (!reason.is_string()) throw MissingKeyError("\"Brief Reason\" must be a string");
  out.reason = trim(reason.get<std::string>());
  if (out.reason.empty()) throw MissingKeyError("\"Brief Reason\" is empty");
  return out;
}

int parse_judge_rating(std::string_view raw) {
  std::optional<json> rating;
  bool saw_object = false;
  for_each_object(raw, [&](JsonObject obj) {
    saw_object = true;
    if (const json* r = find_key(obj.value, "rating")) {
      rating = *r;
      return true;
    }
    return false;
  });
  if (!rating) {
    if (saw_object) throw MissingKeyError("no JSON object carries \"rating\"");
    throw NoJsonError("judge output contains no JSON object");
  }
  long long value = 0;
  if (rating->is_number_integer()) {
    value = rating->get<long long>();
  } else if (rating->is_number_float()) {
    const double d = rating->get<double>();
    if (!std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 1e9) {
      throw RatingRangeError("rating is not an integer");
    }
    value = static_cast<long long>(d);
  } else if (rating->is_string()) {
    const std::string s = trim(rating->get<std::string>());
    if (s.empty() || s.size() > 9 ||
        !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
      throw RatingRangeError("rating is not an integer");
    }
    value = std::stoll(s);
  } else {
    throw RatingRangeError("rating is not an integer");
  }
  if (value < 1 || value > 5) {
    throw RatingRangeError("rating " + std::to_string(value) + " outside 1..5");
  }
  return static_cast<int>(value);
}

}  // namespace moral_lens
