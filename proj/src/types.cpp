#include "moral_lens/types.hpp"

#include <algorithm>
#include <string>

#include "moral_lens/errors.hpp"

namespace moral_lens {

bool is_core_value(std::string_view name) {
  return std::find(kCoreValues.begin(), kCoreValues.end(), name) != kCoreValues.end();
}

std::string_view to_string(Stance stance) {
  return stance == Stance::endorse ? "endorse" : "reject";
}

Stance parse_stance(std::string_view text) {
  if (text == "endorse") return Stance::endorse;
  if (text == "reject") return Stance::reject;
  throw SchemaError("unknown stance '" + std::string(text) + "'");
}

std::string_view stance_verb(Stance stance) {
  return stance == Stance::endorse ? "endorses" : "rejects";
}

std::string_view to_string(Framing framing) {
  switch (framing) {
    case Framing::base: return "base";
    case Framing::persona: return "persona";
    case Framing::first: return "first";
    case Framing::third: return "third";
    case Framing::vote: return "vote";
  }
  return "base";
}

Framing parse_framing(std::string_view text) {
  if (text == "base" || text == "Base") return Framing::base;
  if (text == "persona" || text == "PT-psn") return Framing::persona;
  if (text == "first" || text == "PT-frt") return Framing::first;
  if (text == "third" || text == "PT-trd") return Framing::third;
  if (text == "vote" || text == "PT-vote") return Framing::vote;
  throw SchemaError("unknown framing '" + std::string(text) + "'");
}

std::string_view display_name(Framing framing) {
  switch (framing) {
    case Framing::base: return "Base";
    case Framing::persona: return "PT-psn";
    case Framing::first: return "PT-frt";
    case Framing::third: return "PT-trd";
    case Framing::vote: return "PT-vote";
  }
  return "Base";
}

}  // namespace moral_lens
