#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "moral_lens/compass.hpp"
#include "moral_lens/instrument.hpp"

namespace moral_lens {

struct Participant {
  std::string id;
  std::map<std::string, std::string> moral_answers;  // item id -> label
  std::map<int, int> pct_answers;                    // proposition id -> 1..4
};

/// Reads a delimited participant table. The header must name participant_id,
/// moral item ids from `instruments`, and pct_1 .. pct_62; any other column is
/// rejected. Empty cells are unanswered items. Moral answers must be legal
/// labels for their item.
std::vector<Participant> parse_participants(std::string_view text,
                                            const std::vector<const Instrument*>& instruments,
                                            std::string_view origin = "<memory>", char delimiter = ',');
std::vector<Participant> load_participants(const std::filesystem::path& path,
                                           const std::vector<const Instrument*>& instruments,
                                           char delimiter = ',');

enum class Group { endorsement, rejection };

std::string_view to_string(Group group);

/// Endorsement iff the participant gives the affirming answer to strictly more
/// of the value's items than the non-affirming one. A tie is rejection.
Group assign_group(const Participant& p, const MoralValue& value, const Instrument& instrument);

struct GroupSamples {
  std::vector<Participant> endorsement;  // in draw order
  std::vector<Participant> rejection;
  std::size_t endorsement_available = 0;
  std::size_t rejection_available = 0;
};

/// Groups every participant, then draws n from each group with one seeded
/// sampler (endorsement group first). Participants who answered none of the
/// value's items are left out. InsufficientGroupError when a group is short.
GroupSamples sample_groups(const std::vector<Participant>& participants, const MoralValue& value,
                           const Instrument& instrument, std::size_t n_per_group = 30,
                           std::uint64_t seed = 42);

/// Mean of the members' individual compass scores.
Coordinates group_coordinates(const std::vector<Participant>& sample, const WeightTable& weights);

}  // namespace moral_lens
