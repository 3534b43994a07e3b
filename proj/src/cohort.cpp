#include "moral_lens/cohort.hpp"

#include <algorithm>
#include <set>

#include "moral_lens/errors.hpp"
#include "moral_lens/sampling.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

namespace {

// Minimal RFC 4180 reader: quoted fields may contain the delimiter, quotes
// ("") and newlines.
std::vector<std::vector<std::string>> read_rows(std::string_view text, char delim,
                                                std::string_view origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') continue;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw SchemaError(std::string(origin) + ": unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<Participant> parse_participants(std::string_view text,
                                            const std::vector<const Instrument*>& instruments,
                                            std::string_view origin, char delimiter) {
  const auto rows = read_rows(text, delimiter, origin);
  if (rows.empty()) throw SchemaError(std::string(origin) + ": participant table is empty");

  std::map<std::string, std::pair<const Instrument*, const MoralItem*>> moral_items;
  for (const auto* inst : instruments) {
    for (const auto& item : inst->items) moral_items.emplace(item.id, std::make_pair(inst, &item));
  }

  enum class ColKind { id, moral, pct };
  struct Column {
    ColKind kind;
    std::string item_id;
    int proposition = 0;
  };
  std::vector<Column> columns;
  std::set<std::string> seen;
  bool has_id = false;
  for (const auto& raw : rows.front()) {
    const auto name = trim(raw);
    if (!seen.insert(name).second) {
      throw SchemaError(std::string(origin) + ": duplicate column '" + name + "'");
    }
    if (name == "participant_id") {
      columns.push_back({ColKind::id, {}, 0});
      has_id = true;
    } else if (moral_items.contains(name)) {
      columns.push_back({ColKind::moral, name, 0});
    } else if (name.rfind("pct_", 0) == 0) {
      int pid = 0;
      try {
        std::size_t used = 0;
        pid = std::stoi(name.substr(4), &used);
        if (used != name.size() - 4) pid = 0;
      } catch (const std::exception&) {
        pid = 0;
      }
      if (pid < 1 || pid > kPctPropositionCount) {
        throw SchemaError(std::string(origin) + ": unknown column '" + name + "'");
      }
      columns.push_back({ColKind::pct, {}, pid});
    } else {
      throw SchemaError(std::string(origin) + ": unknown column '" + name + "'");
    }
  }
  if (!has_id) throw SchemaError(std::string(origin) + ": missing participant_id column");

  std::vector<Participant> out;
  std::set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = std::string(origin) + " row " + std::to_string(r + 1);
    if (row.size() != columns.size()) {
      throw SchemaError(where + ": expected " + std::to_string(columns.size()) + " fields, found " +
                        std::to_string(row.size()));
    }
    Participant p;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto cell = trim(row[c]);
      const auto& col = columns[c];
      if (col.kind == ColKind::id) {
        p.id = cell;
        continue;
      }
      if (cell.empty()) continue;
      if (col.kind == ColKind::moral) {
        const auto& [inst, item] = moral_items.at(col.item_id);
        const auto legal = legal_labels(inst->option_format, item->part);
        if (std::find(legal.begin(), legal.end(), cell) == legal.end()) {
          throw SchemaError(where + ": '" + cell + "' is not a legal answer for " + col.item_id);
        }
        p.moral_answers.emplace(col.item_id, cell);
      } else {
        if (cell.size() != 1 || cell[0] < '1' || cell[0] > '4') {
          throw SchemaError(where + ": PCT answer '" + cell + "' must be 1..4");
        }
        p.pct_answers.emplace(col.proposition, cell[0] - '0');
      }
    }
    if (p.id.empty()) throw SchemaError(where + ": empty participant_id");
    if (!ids.insert(p.id).second) throw DuplicateIdError(where + ": participant '" + p.id + "' repeated");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Participant> load_participants(const std::filesystem::path& path,
                                           const std::vector<const Instrument*>& instruments,
                                           char delimiter) {
  return parse_participants(read_text_file(path), instruments, path.string(), delimiter);
}

std::string_view to_string(Group group) {
  return group == Group::endorsement ? "endorsement" : "rejection";
}

Group assign_group(const Participant& p, const MoralValue& value, const Instrument& instrument) {
  std::size_t affirming = 0;
  std::size_t other = 0;
  for (const auto* item : instrument.items_for(value)) {
    auto it = p.moral_answers.find(item->id);
    if (it == p.moral_answers.end()) continue;
    if (it->second == item->endorse_answer) ++affirming;
    else ++other;
  }
  if (affirming + other == 0) {
    throw NoRelevantAnswersError("participant '" + p.id + "' answered no " + value.name + " items in " +
                                 instrument.id);
  }
  return affirming > other ? Group::endorsement : Group::rejection;
}

GroupSamples sample_groups(const std::vector<Participant>& participants, const MoralValue& value,
                           const Instrument& instrument, std::size_t n_per_group,
                           std::uint64_t seed) {
  if (!instrument.carries(value)) {
    throw UnknownValueError("instrument '" + instrument.id + "' has no " + value.name + " items");
  }
  std::vector<const Participant*> endorse;
  std::vector<const Participant*> reject;
  for (const auto& p : participants) {
    try {
      (assign_group(p, value, instrument) == Group::endorsement ? endorse : reject).push_back(&p);
    } catch (const NoRelevantAnswersError&) {
      // Not assessed on this value.
    }
  }
  GroupSamples out;
  out.endorsement_available = endorse.size();
  out.rejection_available = reject.size();
  if (endorse.size() < n_per_group || reject.size() < n_per_group) {
    throw InsufficientGroupError(value.name + ": groups of " + std::to_string(endorse.size()) +
                                 " (endorsement) and " + std::to_string(reject.size()) +
                                 " (rejection), need " + std::to_string(n_per_group) + " each");
  }
  SeededSampler sampler(seed);
  for (auto i : sampler.sample_indices(endorse.size(), n_per_group)) out.endorsement.push_back(*endorse[i]);
  for (auto i : sampler.sample_indices(reject.size(), n_per_group)) out.rejection.push_back(*reject[i]);
  return out;
}

Coordinates group_coordinates(const std::vector<Participant>& sample, const WeightTable& weights) {
  if (sample.empty()) throw InsufficientGroupError("cannot average an empty group");
  Coordinates sum;
  for (const auto& p : sample) {
    if (p.pct_answers.size() != static_cast<std::size_t>(kPctPropositionCount)) {
      throw IncompleteResponsesError("participant '" + p.id + "' answered " +
                                     std::to_string(p.pct_answers.size()) + " of 62 propositions");
    }
    const auto c = score_answers(p.pct_answers, weights);
    sum.economic += c.economic;
    sum.social += c.social;
  }
  const double n = static_cast<double>(sample.size());
  return {sum.economic / n, sum.social / n};
}

}  // namespace moral_lens
