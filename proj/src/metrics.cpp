#include "moral_lens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

namespace {

void require_entries(const ShiftEnsemble& ens) {
  if (ens.size() == 0) {
    throw EmptyEnsembleError("no models in ensemble for " + ens.value().name + "/" +
                             std::string(to_string(ens.framing())));
  }
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

double component(const Coordinates& c, Axis axis) {
  return axis == Axis::economic ? c.economic : c.social;
}

// Labels answered in both sets, paired in proposition order.
std::vector<std::pair<int, int>> shared_labels(const PctResponseSet& a, const PctResponseSet& b) {
  std::vector<std::pair<int, int>> out;
  for (const auto& [pid, la] : a.answers) {
    auto it = b.answers.find(pid);
    if (it != b.answers.end()) out.emplace_back(la, it->second);
  }
  if (out.empty()) throw NoSharedItemsError("response sets share no answered propositions");
  return out;
}

}  // namespace

ShiftEntry ShiftEntry::from_coordinates(std::string model_id, const Coordinates& reject,
                                        const Coordinates& endorse) {
  return {std::move(model_id), shift(endorse, reject), reject, endorse};
}

ShiftEnsemble::ShiftEnsemble(MoralValue value, Framing framing, std::vector<ShiftEntry> entries)
    : value_(std::move(value)), framing_(framing) {
  for (auto& e : entries) add(std::move(e));
}

void ShiftEnsemble::add(ShiftEntry entry) {
  for (const auto& e : entries_) {
    if (e.model_id == entry.model_id) {
      throw DuplicateIdError("model '" + entry.model_id + "' appears twice in ensemble");
    }
  }
  entries_.push_back(std::move(entry));
}

AxisPair mean_shift(const ShiftEnsemble& ens) {
  require_entries(ens);
  AxisPair sum;
  for (const auto& e : ens.entries()) {
    sum.economic += e.delta.d_economic;
    sum.social += e.delta.d_social;
  }
  const double n = static_cast<double>(ens.size());
  return {sum.economic / n, sum.social / n};
}

double mean_magnitude(const ShiftEnsemble& ens) {
  require_entries(ens);
  double sum = 0.0;
  for (const auto& e : ens.entries()) sum += e.delta.norm();
  return sum / static_cast<double>(ens.size());
}

AxisPair directional_bias(const ShiftEnsemble& ens) {
  require_entries(ens);
  int se = 0;
  int ss = 0;
  for (const auto& e : ens.entries()) {
    se += sign(e.delta.d_economic);
    ss += sign(e.delta.d_social);
  }
  const double n = static_cast<double>(ens.size());
  return {se / n, ss / n};
}

double flip_rate(const ShiftEnsemble& ens, Axis axis) {
  require_entries(ens);
  std::size_t flips = 0;
  for (const auto& e : ens.entries()) {
    const double a = component(e.reject, axis);
    const double b = component(e.endorse, axis);
    if (a != 0.0 && b != 0.0 && sign(a) != sign(b)) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(ens.size());
}

MrlResult mrl(const ShiftEnsemble& ens) {
  require_entries(ens);
  MrlResult out;
  double ue = 0.0;
  double us = 0.0;
  std::size_t used = 0;
  for (const auto& e : ens.entries()) {
    const double r = e.delta.norm();
    if (r == 0.0) {
      ++out.excluded;
      continue;
    }
    ue += e.delta.d_economic / r;
    us += e.delta.d_social / r;
    ++used;
  }
  if (used == 0) {
    throw AllZeroShiftsError("every shift in " + ens.value().name + "/" +
                             std::string(to_string(ens.framing())) + " is zero");
  }
  const double n = static_cast<double>(used);
  // Rounding in the unit vectors can push identical directions a few ulps past 1.
  out.value = std::min(1.0, std::hypot(ue / n, us / n));
  return out;
}

Dispersion dispersion(const ShiftEnsemble& ens, Condition condition) {
  require_entries(ens);
  const auto pick = [&](const ShiftEntry& e) -> const Coordinates& {
    return condition == Condition::reject ? e.reject : e.endorse;
  };
  const double n = static_cast<double>(ens.size());
  Dispersion out;
  for (const auto& e : ens.entries()) {
    out.centroid.economic += pick(e).economic;
    out.centroid.social += pick(e).social;
  }
  out.centroid.economic /= n;
  out.centroid.social /= n;
  double sq = 0.0;
  for (const auto& e : ens.entries()) {
    const double de = pick(e).economic - out.centroid.economic;
    const double ds = pick(e).social - out.centroid.social;
    sq += de * de + ds * ds;
  }
  out.rms = std::sqrt(sq / n);
  return out;
}

double strong_response_rate(const PctResponseSet& responses) {
  if (responses.answers.empty()) throw EmptyResponsesError("no answered propositions");
  std::size_t strong = 0;
  for (const auto& [pid, label] : responses.answers) {
    if (label == 1 || label == 4) ++strong;
  }
  return static_cast<double>(strong) / static_cast<double>(responses.answers.size());
}

double stance_reversal_rate(const PctResponseSet& reject, const PctResponseSet& endorse) {
  const auto pairs = shared_labels(reject, endorse);
  std::size_t crossed = 0;
  for (const auto& [a, b] : pairs) {
    if ((a <= 2) != (b <= 2)) ++crossed;
  }
  return static_cast<double>(crossed) / static_cast<double>(pairs.size());
}

double mean_abs_distance(const PctResponseSet& a, const PctResponseSet& b) {
  const auto pairs = shared_labels(a, b);
  long total = 0;
  for (const auto& [x, y] : pairs) total += std::abs(x - y);
  return static_cast<double>(total) / static_cast<double>(pairs.size());
}

MetricsSummary summarize(const ShiftEnsemble& ens) {
  MetricsSummary s;
  s.value = ens.value();
  s.framing = ens.framing();
  s.n = ens.size();
  s.mean_shift = mean_shift(ens);
  s.mean_magnitude = mean_magnitude(ens);
  s.directional_bias = directional_bias(ens);
  s.flip_rate = {flip_rate(ens, Axis::economic), flip_rate(ens, Axis::social)};
  try {
    const auto m = mrl(ens);
    s.mrl = m.value;
    s.mrl_excluded = m.excluded;
  } catch (const AllZeroShiftsError&) {
    s.mrl_excluded = ens.size();
  }
  const auto rej = dispersion(ens, Condition::reject);
  const auto eds = dispersion(ens, Condition::endorse);
  s.centroid_reject = rej.centroid;
  s.centroid_endorse = eds.centroid;
  s.dispersion_reject = rej.rms;
  s.dispersion_endorse = eds.rms;
  return s;
}

std::string metrics_csv(const std::vector<MetricsSummary>& rows) {
  std::string out =
      "value,framing,n,mean_shift_e,mean_shift_s,mean_magnitude,sign_e,sign_s,flip_e,flip_s,"
      "mrl,mrl_excluded,centroid_rej_e,centroid_rej_s,centroid_eds_e,centroid_eds_s,rms_rej,"
      "rms_eds\n";
  for (const auto& r : rows) {
    const std::string cells[] = {
        r.value.name,
        std::string(display_name(r.framing)),
        std::to_string(r.n),
        format_number(r.mean_shift.economic),
        format_number(r.mean_shift.social),
        format_number(r.mean_magnitude),
        format_number(r.directional_bias.economic),
        format_number(r.directional_bias.social),
        format_number(r.flip_rate.economic),
        format_number(r.flip_rate.social),
        r.mrl ? format_number(*r.mrl) : std::string(),
        std::to_string(r.mrl_excluded),
        format_number(r.centroid_reject.economic),
        format_number(r.centroid_reject.social),
        format_number(r.centroid_endorse.economic),
        format_number(r.centroid_endorse.social),
        format_number(r.dispersion_reject),
        format_number(r.dispersion_endorse),
    };
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out.push_back(',');
      out += c;
      first = false;
    }
    out.push_back('\n');
  }
  return out;
}

std::string metrics_json(const std::vector<MetricsSummary>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["value"] = r.value.name;
    j["framing"] = to_string(r.framing);
    j["n"] = r.n;
    j["mean_shift"] = {r.mean_shift.economic, r.mean_shift.social};
    j["mean_magnitude"] = r.mean_magnitude;
    j["directional_bias"] = {r.directional_bias.economic, r.directional_bias.social};
    j["flip_rate"] = {r.flip_rate.economic, r.flip_rate.social};
    j["mrl"] = r.mrl ? nlohmann::ordered_json(*r.mrl) : nlohmann::ordered_json(nullptr);
    j["mrl_excluded"] = r.mrl_excluded;
    j["centroid_reject"] = {r.centroid_reject.economic, r.centroid_reject.social};
    j["centroid_endorse"] = {r.centroid_endorse.economic, r.centroid_endorse.social};
    j["dispersion"] = {r.dispersion_reject, r.dispersion_endorse};
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace moral_lens
