#include "moral_lens/compass.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "json_fields.hpp"
#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

double ShiftVector::norm() const { return std::hypot(d_economic, d_social); }

ShiftVector shift(const Coordinates& endorse, const Coordinates& reject) {
  return {endorse.economic - reject.economic, endorse.social - reject.social};
}

namespace {

constexpr double kBound = 10.0;
// Slack for the range check so tables normalized to exactly +-10 are not
// rejected over the last ulp.
constexpr double kBoundSlack = 1e-9;

AxisNormalization parse_norm(const nlohmann::json& j, std::string_view axis, std::string_view origin) {
  detail::require_object<WeightTableError>(j, "normalization." + std::string(axis), origin);
  detail::allow_keys<WeightTableError>(j, {"scale", "offset"}, "normalization", origin);
  return {detail::require_number<WeightTableError>(j, "scale", axis, origin),
          detail::require_number<WeightTableError>(j, "offset", axis, origin)};
}

void check_axis(const WeightTable::Entries& entries, std::size_t axis, const AxisNormalization& norm,
                std::string_view name) {
  if (!std::isfinite(norm.scale) || !std::isfinite(norm.offset) || norm.scale == 0.0) {
    throw WeightTableError(std::string(name) + " normalization must be finite with non-zero scale");
  }
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& row : entries) {
    double row_lo = row[0][axis];
    double row_hi = row[0][axis];
    for (const auto& c : row) {
      if (!std::isfinite(c[axis])) throw WeightTableError("non-finite contribution");
      row_lo = std::min(row_lo, c[axis]);
      row_hi = std::max(row_hi, c[axis]);
    }
    lo += row_lo;
    hi += row_hi;
  }
  const double a = norm.scale * lo + norm.offset;
  const double b = norm.scale * hi + norm.offset;
  if (std::min(a, b) < -kBound - kBoundSlack || std::max(a, b) > kBound + kBoundSlack) {
    throw WeightTableError(std::string(name) + " axis reaches [" + format_number(std::min(a, b)) +
                           ", " + format_number(std::max(a, b)) + "], outside [-10, 10]");
  }
}

}  // namespace

WeightTable::WeightTable(Entries entries, AxisNormalization economic, AxisNormalization social)
    : entries_(entries), economic_(economic), social_(social) {
  check_axis(entries_, 0, economic_, "economic");
  check_axis(entries_, 1, social_, "social");
}

WeightTable WeightTable::parse(std::string_view json_text, std::string_view origin) {
  auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw WeightTableError(std::string(origin) + ": not valid JSON");
  detail::require_object<WeightTableError>(doc, "weight table", origin);

  Entries entries{};
  std::array<bool, kPctPropositionCount> seen{};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    if (key == "normalization" || key == "description") continue;
    int pid = 0;
    try {
      std::size_t used = 0;
      pid = std::stoi(key, &used);
      if (used != key.size()) pid = 0;
    } catch (const std::exception&) {
      pid = 0;
    }
    if (pid < 1 || pid > kPctPropositionCount) {
      throw WeightTableError(std::string(origin) + ": unexpected key '" + key + "'");
    }
    const auto& row = it.value();
    detail::require_object<WeightTableError>(row, "proposition " + key, origin);
    if (row.size() != 4) {
      throw WeightTableError(std::string(origin) + ": proposition " + key + " must list options 1..4");
    }
    for (int opt = 1; opt <= 4; ++opt) {
      const auto& pair = detail::require_field<WeightTableError>(row, std::to_string(opt),
                                                                 "proposition " + key, origin);
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        throw WeightTableError(std::string(origin) + ": proposition " + key + " option " +
                               std::to_string(opt) + " must be [econ, social]");
      }
      entries[static_cast<std::size_t>(pid - 1)][static_cast<std::size_t>(opt - 1)] = {
          pair[0].get<double>(), pair[1].get<double>()};
    }
    seen[static_cast<std::size_t>(pid - 1)] = true;
  }
  for (int pid = 1; pid <= kPctPropositionCount; ++pid) {
    if (!seen[static_cast<std::size_t>(pid - 1)]) {
      throw WeightTableError(std::string(origin) + ": proposition " + std::to_string(pid) +
                             " has no weights");
    }
  }
  const auto& norm = detail::require_field<WeightTableError>(doc, "normalization", "weight table", origin);
  detail::require_object<WeightTableError>(norm, "normalization", origin);
  detail::allow_keys<WeightTableError>(norm, {"econ", "social"}, "normalization", origin);
  return WeightTable(entries,
                     parse_norm(detail::require_field<WeightTableError>(norm, "econ", "normalization", origin),
                                "econ", origin),
                     parse_norm(detail::require_field<WeightTableError>(norm, "social", "normalization", origin),
                                "social", origin));
}

WeightTable WeightTable::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const SchemaError& e) {
    throw WeightTableError(e.what());
  }
  return parse(text, path.string());
}

const WeightTable::Contribution& WeightTable::contribution(int proposition_id, int label) const {
  if (proposition_id < 1 || proposition_id > kPctPropositionCount || label < 1 || label > 4) {
    throw WeightTableError("no weight for proposition " + std::to_string(proposition_id) +
                           " option " + std::to_string(label));
  }
  return entries_[static_cast<std::size_t>(proposition_id - 1)][static_cast<std::size_t>(label - 1)];
}

std::string CellKey::to_string() const {
  std::string out = model_id;
  out += '|';
  out += value ? value->name : "-";
  out += '|';
  out += stance ? std::string(moral_lens::to_string(*stance)) : "-";
  out += '|';
  out += moral_lens::to_string(framing);
  return out;
}

CellKey CellKey::parse(std::string_view text) {
  // The model id may itself contain '|', so split from the right.
  const auto p3 = text.rfind('|');
  const auto p2 = p3 == std::string_view::npos ? p3 : text.rfind('|', p3 - 1);
  const auto p1 = p2 == std::string_view::npos || p2 == 0 ? std::string_view::npos : text.rfind('|', p2 - 1);
  if (p1 == std::string_view::npos) throw SchemaError("malformed cell key '" + std::string(text) + "'");
  CellKey key;
  key.model_id = std::string(text.substr(0, p1));
  const auto value = text.substr(p1 + 1, p2 - p1 - 1);
  const auto stance = text.substr(p2 + 1, p3 - p2 - 1);
  if (value != "-") key.value = MoralValue{std::string(value)};
  if (stance != "-") key.stance = parse_stance(stance);
  key.framing = parse_framing(text.substr(p3 + 1));
  return key;
}

void PctResponseSet::validate() const {
  for (const auto& [pid, label] : answers) {
    if (pid < 1 || pid > kPctPropositionCount) {
      throw SchemaError("answer for proposition " + std::to_string(pid) + " outside 1..62");
    }
    if (label < 1 || label > 4) {
      throw SchemaError("label " + std::to_string(label) + " outside 1..4");
    }
    if (missing.contains(pid)) {
      throw SchemaError("proposition " + std::to_string(pid) + " is both answered and missing");
    }
  }
  for (int pid : missing) {
    if (pid < 1 || pid > kPctPropositionCount) {
      throw SchemaError("missing proposition " + std::to_string(pid) + " outside 1..62");
    }
  }
  if (answers.size() + missing.size() != static_cast<std::size_t>(kPctPropositionCount)) {
    throw SchemaError("answers and missing do not cover propositions 1..62");
  }
}

Coordinates score_answers(const std::map<int, int>& answers, const WeightTable& weights,
                          PartialPolicy policy) {
  if (answers.empty()) throw IncompleteResponsesError("no answered propositions");
  if (answers.size() != static_cast<std::size_t>(kPctPropositionCount) &&
      policy == PartialPolicy::reject) {
    throw IncompleteResponsesError(std::to_string(answers.size()) +
                                   " of 62 propositions answered");
  }
  double econ = 0.0;
  double social = 0.0;
  // std::map iterates in proposition order, so the sum is independent of the
  // order answers were collected in.
  for (const auto& [pid, label] : answers) {
    const auto& c = weights.contribution(pid, label);
    econ += c[0];
    social += c[1];
  }
  if (answers.size() != static_cast<std::size_t>(kPctPropositionCount)) {
    const double factor = static_cast<double>(kPctPropositionCount) / static_cast<double>(answers.size());
    econ *= factor;
    social *= factor;
  }
  const auto& en = weights.economic_normalization();
  const auto& sn = weights.social_normalization();
  Coordinates out{en.scale * econ + en.offset, sn.scale * social + sn.offset};
  // Renormalized partial sets can overshoot; keep them on the compass.
  out.economic = std::clamp(out.economic, -kBound, kBound);
  out.social = std::clamp(out.social, -kBound, kBound);
  return out;
}

Coordinates score(const PctResponseSet& responses, const WeightTable& weights, PartialPolicy policy) {
  responses.validate();
  if (!responses.missing.empty() && policy == PartialPolicy::reject) {
    throw IncompleteResponsesError(std::to_string(responses.missing.size()) +
                                   " propositions missing for cell " + responses.key.to_string());
  }
  return score_answers(responses.answers, weights, policy);
}

}  // namespace moral_lens
