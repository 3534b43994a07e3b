#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>

namespace moral_lens {

/// A moral value such as "Care" or "Utilitarianism". The core set is closed;
/// instruments may declare extension values (e.g. Schwartz values).
struct MoralValue {
  std::string name;

  auto operator<=>(const MoralValue&) const = default;
};

inline constexpr std::array<std::string_view, 7> kCoreValues = {
    "Care", "Fairness", "Loyalty", "Authority", "Purity", "Utilitarianism", "Deontology"};

bool is_core_value(std::string_view name);

enum class Stance { endorse, reject };

std::string_view to_string(Stance stance);
Stance parse_stance(std::string_view text);
/// "endorses" / "rejects", as used inside the persona prompt.
std::string_view stance_verb(Stance stance);

/// Role framing of a PCT prompt. `base` carries no moral conditioning.
enum class Framing { base, persona, first, third, vote };

inline constexpr std::array<Framing, 5> kAllFramings = {
    Framing::base, Framing::persona, Framing::first, Framing::third, Framing::vote};

std::string_view to_string(Framing framing);
/// Accepts the canonical tags plus the table-style aliases
/// ("PT-frt", "PT-trd", "PT-vote", "PT-psn").
Framing parse_framing(std::string_view text);
/// Column heading used in metric tables ("PT-frt", ..., "Base").
std::string_view display_name(Framing framing);

/// The four PCT options in scale order; label k (1..4) is kPctOptionLabels[k - 1].
inline constexpr std::array<std::string_view, 4> kPctOptionLabels = {
    "Strongly disagree", "Disagree", "Agree", "Strongly agree"};

inline constexpr int kPctPropositionCount = 62;

}  // namespace moral_lens
