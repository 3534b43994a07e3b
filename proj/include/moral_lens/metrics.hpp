#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "moral_lens/compass.hpp"
#include "moral_lens/types.hpp"

namespace moral_lens {

/// One model's contribution to an ensemble.
struct ShiftEntry {
  std::string model_id;
  ShiftVector delta;
  Coordinates reject;
  Coordinates endorse;

  static ShiftEntry from_coordinates(std::string model_id, const Coordinates& reject,
                                     const Coordinates& endorse);
};

/// Per-model shifts for one (value, framing). Model ids are unique; an empty
/// ensemble can be built but every metric on it raises EmptyEnsembleError.
class ShiftEnsemble {
 public:
  ShiftEnsemble(MoralValue value, Framing framing, std::vector<ShiftEntry> entries = {});

  /// Throws DuplicateIdError when the model is already present.
  void add(ShiftEntry entry);

  const MoralValue& value() const { return value_; }
  Framing framing() const { return framing_; }
  const std::vector<ShiftEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  MoralValue value_;
  Framing framing_;
  std::vector<ShiftEntry> entries_;
};

struct AxisPair {
  double economic = 0.0;
  double social = 0.0;
};

enum class Axis { economic, social };
enum class Condition { reject, endorse };

/// Per-axis mean of the shift components.
AxisPair mean_shift(const ShiftEnsemble& ens);
/// Mean of the per-model L2 norms (norm first, then mean).
double mean_magnitude(const ShiftEnsemble& ens);
/// Mean three-valued sign per axis, sign(0) = 0.
AxisPair directional_bias(const ShiftEnsemble& ens);
/// Fraction of models whose coordinate on `axis` changes sign between the
/// reject and endorse conditions. Exact zeros never count as a crossing.
double flip_rate(const ShiftEnsemble& ens, Axis axis);

struct MrlResult {
  double value = 0.0;
  std::size_t excluded = 0;  // zero-length shifts left out of the mean
};

/// Length of the mean unit shift direction. Zero shifts are excluded and
/// counted; AllZeroShiftsError when nothing is left.
MrlResult mrl(const ShiftEnsemble& ens);

struct Dispersion {
  Coordinates centroid;
  double rms = 0.0;
};

/// Centroid and root-mean-square distance to it for one condition.
Dispersion dispersion(const ShiftEnsemble& ens, Condition condition);

/// Share of answered items labelled 1 or 4.
double strong_response_rate(const PctResponseSet& responses);
/// Share of items answered in both sets whose labels sit on opposite sides of
/// the agree/disagree midline.
double stance_reversal_rate(const PctResponseSet& reject, const PctResponseSet& endorse);
/// Mean |label_a - label_b| over items answered in both sets.
double mean_abs_distance(const PctResponseSet& a, const PctResponseSet& b);

struct MetricsSummary {
  MoralValue value;
  Framing framing = Framing::first;
  std::size_t n = 0;
  AxisPair mean_shift;
  double mean_magnitude = 0.0;
  AxisPair directional_bias;
  AxisPair flip_rate;
  std::optional<double> mrl;  // unset when every shift is zero
  std::size_t mrl_excluded = 0;
  Coordinates centroid_reject;
  Coordinates centroid_endorse;
  double dispersion_reject = 0.0;
  double dispersion_endorse = 0.0;
};

MetricsSummary summarize(const ShiftEnsemble& ens);

/// One row per (value, framing), full precision, header first.
std::string metrics_csv(const std::vector<MetricsSummary>& rows);
/// Same content as a JSON array, two-space indented with trailing newline.
std::string metrics_json(const std::vector<MetricsSummary>& rows);

}  // namespace moral_lens
