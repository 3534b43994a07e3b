#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moral_lens/types.hpp"

namespace moral_lens {

enum class InstrumentKind { moral, political };

/// binary_agree: agree/disagree (MFQ relevance items use relevant/not relevant).
/// appropriateness: appropriate/inappropriate. four_point_likert: PCT only.
enum class OptionFormat { binary_agree, appropriateness, four_point_likert };

enum class ItemPart { relevance, agreement };

struct MoralItem {
  std::string id;
  MoralValue value_tag;
  std::optional<ItemPart> part;
  std::string text;
  std::string endorse_answer;
};

struct PctProposition {
  int id = 0;
  std::string text;
};

/// A questionnaire as loaded from disk. Moral instruments fill `items`,
/// the political instrument fills `propositions`.
struct Instrument {
  std::string id;
  InstrumentKind kind = InstrumentKind::moral;
  OptionFormat option_format = OptionFormat::binary_agree;
  std::vector<std::string> extension_values;
  std::vector<MoralItem> items;
  std::vector<PctProposition> propositions;

  /// Distinct value tags in first-appearance order.
  std::vector<MoralValue> values() const;
  std::vector<const MoralItem*> items_for(const MoralValue& value) const;
  bool carries(const MoralValue& value) const;
  const PctProposition& proposition(int id) const;
};

struct Assignment {
  MoralItem item;
  std::string answer;
};

struct ConditioningProfile {
  MoralValue value;
  Stance stance = Stance::endorse;
  std::string instrument_id;
  std::vector<Assignment> assignments;

  /// "<instrument>:<value>:<stance>", used as the prompt's profile reference.
  std::string id() const;
};

std::string_view to_string(InstrumentKind kind);
std::string_view to_string(OptionFormat format);
std::string_view to_string(ItemPart part);

/// Labels an item may be answered with. Binary formats only.
std::vector<std::string> legal_labels(OptionFormat format, std::optional<ItemPart> part);
/// agree <-> disagree, appropriate <-> inappropriate, relevant <-> not relevant.
std::string complement_label(std::string_view label);

Instrument parse_instrument(std::string_view json_text, std::string_view origin = "<memory>");
Instrument load_instrument(const std::filesystem::path& path);
/// Loads and validates every file; instrument ids must be unique across files.
std::vector<Instrument> load_instruments(std::span<const std::filesystem::path> paths);

/// Canonical UTF-8 serialization: fixed field order, two-space indent,
/// trailing newline. Bundled files are stored in exactly this form.
std::string serialize_instrument(const Instrument& instrument);

/// Expands (value, stance) into one assigned answer per item of the value.
ConditioningProfile build_profile(const Instrument& instrument, const MoralValue& value,
                                  Stance stance);

/// Read-only collection of loaded instruments.
class InstrumentStore {
 public:
  explicit InstrumentStore(std::vector<Instrument> instruments);

  static InstrumentStore load(std::span<const std::filesystem::path> paths);

  const Instrument& get(std::string_view id) const;
  const Instrument* find(std::string_view id) const;
  /// The political instrument. Throws SchemaError when none was loaded.
  const Instrument& pct() const;
  const std::vector<Instrument>& all() const { return instruments_; }

 private:
  std::vector<Instrument> instruments_;
};

/// Directory holding the bundled data/ tree. Resolution order: the
/// MORAL_LENS_DATA_DIR environment variable, then set_data_dir(), then the
/// source-tree path baked in at build time.
std::filesystem::path data_dir();
void set_data_dir(std::filesystem::path dir);

}  // namespace moral_lens
