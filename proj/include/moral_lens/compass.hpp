#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "moral_lens/types.hpp"

namespace moral_lens {

/// Position on the political compass. Positive economic = right, positive
/// social = authoritarian; both lie in [-10, 10] for complete response sets.
struct Coordinates {
  double economic = 0.0;
  double social = 0.0;

  bool operator==(const Coordinates&) const = default;
};

/// Endorse-condition coordinates minus reject-condition coordinates.
struct ShiftVector {
  double d_economic = 0.0;
  double d_social = 0.0;

  double norm() const;
  bool operator==(const ShiftVector&) const = default;
};

ShiftVector shift(const Coordinates& endorse, const Coordinates& reject);

struct AxisNormalization {
  double scale = 1.0;
  double offset = 0.0;
};

/// Per-proposition, per-option (economic, social) contributions plus an affine
/// normalization per axis: coordinate = scale * sum + offset.
class WeightTable {
 public:
  using Contribution = std::array<double, 2>;
  using Entries = std::array<std::array<Contribution, 4>, kPctPropositionCount>;

  /// Validates completeness, finiteness and that every complete response set
  /// lands in [-10, 10]^2. Throws WeightTableError.
  WeightTable(Entries entries, AxisNormalization economic, AxisNormalization social);

  static WeightTable parse(std::string_view json_text, std::string_view origin = "<memory>");
  static WeightTable load(const std::filesystem::path& path);

  const Contribution& contribution(int proposition_id, int label) const;
  const AxisNormalization& economic_normalization() const { return economic_; }
  const AxisNormalization& social_normalization() const { return social_; }

 private:
  Entries entries_;
  AxisNormalization economic_;
  AxisNormalization social_;
};

/// Identifies one experimental cell. `value` and `stance` are unset for the
/// base framing.
struct CellKey {
  std::string model_id;
  std::optional<MoralValue> value;
  std::optional<Stance> stance;
  Framing framing = Framing::base;

  /// "model|value|stance|framing" with "-" for unset parts.
  std::string to_string() const;
  static CellKey parse(std::string_view text);
  auto operator<=>(const CellKey&) const = default;
};

/// Parsed PCT answers for one cell. answers and missing partition 1..62.
struct PctResponseSet {
  CellKey key;
  std::map<int, int> answers;        // proposition id -> label 1..4
  std::map<int, std::string> reasons;  // proposition id -> brief reason
  std::set<int> missing;

  /// Throws SchemaError when the partition or label-range invariant fails.
  void validate() const;
  bool complete() const { return missing.empty() && answers.size() == kPctPropositionCount; }
};

enum class PartialPolicy {
  reject,       // incomplete sets raise IncompleteResponsesError
  renormalize,  // sums are scaled by 62 / answered before normalization
};

/// Scores a complete answer map (proposition id -> label).
Coordinates score_answers(const std::map<int, int>& answers, const WeightTable& weights,
                          PartialPolicy policy = PartialPolicy::reject);
Coordinates score(const PctResponseSet& responses, const WeightTable& weights,
                  PartialPolicy policy = PartialPolicy::reject);

}  // namespace moral_lens
