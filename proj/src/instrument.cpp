#include "moral_lens/instrument.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "json_fields.hpp"
#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

using ordered_json = nlohmann::ordered_json;

namespace {

// Bundled instruments whose value groups have a fixed size.
constexpr std::size_t kItemsPerValueGroup = 6;

bool has_fixed_group_size(std::string_view instrument_id) {
  return instrument_id == "mfq" || instrument_id == "ous" || instrument_id == "factual_dilemmas";
}

InstrumentKind parse_kind(std::string_view s, std::string_view origin) {
  if (s == "moral") return InstrumentKind::moral;
  if (s == "political") return InstrumentKind::political;
  throw SchemaError(std::string(origin) + ": unknown kind '" + std::string(s) + "'");
}

OptionFormat parse_format(std::string_view s, std::string_view origin) {
  if (s == "binary_agree") return OptionFormat::binary_agree;
  if (s == "appropriateness") return OptionFormat::appropriateness;
  if (s == "four_point_likert") return OptionFormat::four_point_likert;
  throw SchemaError(std::string(origin) + ": unknown option_format '" + std::string(s) + "'");
}

ItemPart parse_part(std::string_view s, std::string_view origin) {
  if (s == "relevance") return ItemPart::relevance;
  if (s == "agreement") return ItemPart::agreement;
  throw SchemaError(std::string(origin) + ": unknown part '" + std::string(s) + "'");
}

void parse_moral_items(const ordered_json& items, Instrument& out, std::string_view origin) {
  std::set<std::string> seen;
  for (const auto& j : items) {
    detail::require_object<SchemaError>(j, "item", origin);
    detail::allow_keys<SchemaError>(j, {"id", "value_tag", "part", "text", "endorse_answer"}, "item",
                                    origin);
    MoralItem item;
    item.id = detail::require_string<SchemaError>(j, "id", "item", origin);
    item.value_tag.name = detail::require_string<SchemaError>(j, "value_tag", "item " + item.id, origin);
    if (j.contains("part")) {
      item.part = parse_part(detail::require_string<SchemaError>(j, "part", "item " + item.id, origin),
                             origin);
    }
    item.text = detail::require_string<SchemaError>(j, "text", "item " + item.id, origin);
    item.endorse_answer =
        detail::require_string<SchemaError>(j, "endorse_answer", "item " + item.id, origin);

    if (!seen.insert(item.id).second) {
      throw DuplicateIdError(std::string(origin) + ": duplicate item id '" + item.id + "'");
    }
    const bool extension = std::find(out.extension_values.begin(), out.extension_values.end(),
                                     item.value_tag.name) != out.extension_values.end();
    if (!is_core_value(item.value_tag.name) && !extension) {
      throw SchemaError(std::string(origin) + ": item " + item.id + " has value_tag '" +
                        item.value_tag.name + "' outside the core set and no extension declares it");
    }
    const auto labels = legal_labels(out.option_format, item.part);
    if (std::find(labels.begin(), labels.end(), item.endorse_answer) == labels.end()) {
      throw SchemaError(std::string(origin) + ": item " + item.id + " endorse_answer '" +
                        item.endorse_answer + "' is not a legal label for " +
                        std::string(to_string(out.option_format)));
    }
    out.items.push_back(std::move(item));
  }
  if (out.items.empty()) throw CardinalityError(std::string(origin) + ": instrument has no items");

  if (has_fixed_group_size(out.id)) {
    for (const auto& value : out.values()) {
      const auto n = out.items_for(value).size();
      if (n != kItemsPerValueGroup) {
        throw CardinalityError(std::string(origin) + ": value group '" + value.name + "' has " +
                               std::to_string(n) + " items, expected " +
                               std::to_string(kItemsPerValueGroup));
      }
    }
  }
}

void parse_propositions(const ordered_json& items, Instrument& out, std::string_view origin) {
  std::set<int> seen;
  for (const auto& j : items) {
    detail::require_object<SchemaError>(j, "proposition", origin);
    detail::allow_keys<SchemaError>(j, {"id", "text"}, "proposition", origin);
    const auto& id = detail::require_field<SchemaError>(j, "id", "proposition", origin);
    if (!id.is_number_integer()) {
      throw SchemaError(std::string(origin) + ": proposition id must be an integer");
    }
    PctProposition p;
    p.id = id.get<int>();
    p.text = detail::require_string<SchemaError>(j, "text", "proposition " + std::to_string(p.id),
                                                 origin);
    if (p.id < 1 || p.id > kPctPropositionCount) {
      throw SchemaError(std::string(origin) + ": proposition id " + std::to_string(p.id) +
                        " outside 1..62");
    }
    if (!seen.insert(p.id).second) {
      throw DuplicateIdError(std::string(origin) + ": duplicate proposition id " +
                             std::to_string(p.id));
    }
    out.propositions.push_back(std::move(p));
  }
  if (out.propositions.size() != static_cast<std::size_t>(kPctPropositionCount)) {
    throw CardinalityError(std::string(origin) + ": political instrument has " +
                           std::to_string(out.propositions.size()) + " propositions, expected 62");
  }
  std::sort(out.propositions.begin(), out.propositions.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
}

}  // namespace

std::vector<MoralValue> Instrument::values() const {
  std::vector<MoralValue> out;
  for (const auto& item : items) {
    if (std::find(out.begin(), out.end(), item.value_tag) == out.end()) out.push_back(item.value_tag);
  }
  return out;
}

std::vector<const MoralItem*> Instrument::items_for(const MoralValue& value) const {
  std::vector<const MoralItem*> out;
  for (const auto& item : items) {
    if (item.value_tag == value) out.push_back(&item);
  }
  return out;
}

bool Instrument::carries(const MoralValue& value) const {
  return std::any_of(items.begin(), items.end(),
                     [&](const MoralItem& item) { return item.value_tag == value; });
}

const PctProposition& Instrument::proposition(int pid) const {
  for (const auto& p : propositions) {
    if (p.id == pid) return p;
  }
  throw SchemaError("instrument " + id + " has no proposition " + std::to_string(pid));
}

std::string ConditioningProfile::id() const {
  return instrument_id + ":" + value.name + ":" + std::string(to_string(stance));
}

std::string_view to_string(InstrumentKind kind) {
  return kind == InstrumentKind::moral ? "moral" : "political";
}

std::string_view to_string(OptionFormat format) {
  switch (format) {
    case OptionFormat::binary_agree: return "binary_agree";
    case OptionFormat::appropriateness: return "appropriateness";
    case OptionFormat::four_point_likert: return "four_point_likert";
  }
  return "binary_agree";
}

std::string_view to_string(ItemPart part) {
  return part == ItemPart::relevance ? "relevance" : "agreement";
}

std::vector<std::string> legal_labels(OptionFormat format, std::optional<ItemPart> part) {
  switch (format) {
    case OptionFormat::binary_agree:
      if (part == ItemPart::relevance) return {"relevant", "not relevant"};
      return {"agree", "disagree"};
    case OptionFormat::appropriateness:
      return {"appropriate", "inappropriate"};
    case OptionFormat::four_point_likert:
      break;
  }
  return {};
}

std::string complement_label(std::string_view label) {
  static const std::map<std::string, std::string, std::less<>> kPairs = {
      {"agree", "disagree"},       {"disagree", "agree"},
      {"appropriate", "inappropriate"}, {"inappropriate", "appropriate"},
      {"relevant", "not relevant"}, {"not relevant", "relevant"},
  };
  auto it = kPairs.find(label);
  if (it == kPairs.end()) throw SchemaError("label '" + std::string(label) + "' has no complement");
  return it->second;
}

Instrument parse_instrument(std::string_view json_text, std::string_view origin) {
  ordered_json doc = ordered_json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw SchemaError(std::string(origin) + ": not valid JSON");
  detail::require_object<SchemaError>(doc, "instrument", origin);
  detail::allow_keys<SchemaError>(doc, {"id", "kind", "option_format", "extension_values", "items"},
                                  "instrument", origin);

  Instrument out;
  out.id = detail::require_string<SchemaError>(doc, "id", "instrument", origin);
  out.kind = parse_kind(detail::require_string<SchemaError>(doc, "kind", "instrument", origin), origin);
  out.option_format =
      parse_format(detail::require_string<SchemaError>(doc, "option_format", "instrument", origin),
                   origin);
  if (doc.contains("extension_values")) {
    const auto& ext = doc["extension_values"];
    if (!ext.is_array()) throw SchemaError(std::string(origin) + ": extension_values must be an array");
    for (const auto& v : ext) {
      if (!v.is_string() || v.get<std::string>().empty()) {
        throw SchemaError(std::string(origin) + ": extension_values entries must be non-empty strings");
      }
      out.extension_values.push_back(v.get<std::string>());
    }
  }
  const bool political = out.kind == InstrumentKind::political;
  if (political != (out.option_format == OptionFormat::four_point_likert)) {
    throw SchemaError(std::string(origin) +
                      ": four_point_likert is reserved for, and required by, the political instrument");
  }
  const auto& items = detail::require_field<SchemaError>(doc, "items", "instrument", origin);
  if (!items.is_array()) throw SchemaError(std::string(origin) + ": items must be an array");

  if (political) {
    parse_propositions(items, out, origin);
  } else {
    parse_moral_items(items, out, origin);
  }
  return out;
}

Instrument load_instrument(const std::filesystem::path& path) {
  return parse_instrument(read_text_file(path), path.string());
}

std::vector<Instrument> load_instruments(std::span<const std::filesystem::path> paths) {
  std::vector<Instrument> out;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    auto inst = load_instrument(p);
    if (!ids.insert(inst.id).second) {
      throw DuplicateIdError(p.string() + ": instrument id '" + inst.id + "' already loaded");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::string serialize_instrument(const Instrument& instrument) {
  ordered_json doc;
  doc["id"] = instrument.id;
  doc["kind"] = std::string(to_string(instrument.kind));
  doc["option_format"] = std::string(to_string(instrument.option_format));
  if (!instrument.extension_values.empty()) doc["extension_values"] = instrument.extension_values;
  auto items = ordered_json::array();
  if (instrument.kind == InstrumentKind::political) {
    for (const auto& p : instrument.propositions) {
      ordered_json j;
      j["id"] = p.id;
      j["text"] = p.text;
      items.push_back(std::move(j));
    }
  } else {
    for (const auto& item : instrument.items) {
      ordered_json j;
      j["id"] = item.id;
      j["value_tag"] = item.value_tag.name;
      if (item.part) j["part"] = std::string(to_string(*item.part));
      j["text"] = item.text;
      j["endorse_answer"] = item.endorse_answer;
      items.push_back(std::move(j));
    }
  }
  doc["items"] = std::move(items);
  return doc.dump(2) + "\n";
}

ConditioningProfile build_profile(const Instrument& instrument, const MoralValue& value,
                                  Stance stance) {
  if (instrument.kind != InstrumentKind::moral) {
    throw UnknownValueError("instrument " + instrument.id + " is not a moral instrument");
  }
  const auto items = instrument.items_for(value);
  if (items.empty()) {
    throw UnknownValueError("instrument " + instrument.id + " carries no items for value '" +
                            value.name + "'");
  }
  ConditioningProfile profile{value, stance, instrument.id, {}};
  profile.assignments.reserve(items.size());
  for (const MoralItem* item : items) {
    std::string answer =
        stance == Stance::endorse ? item->endorse_answer : complement_label(item->endorse_answer);
    profile.assignments.push_back({*item, std::move(answer)});
  }
  return profile;
}

InstrumentStore::InstrumentStore(std::vector<Instrument> instruments)
    : instruments_(std::move(instruments)) {
  std::set<std::string> ids;
  for (const auto& inst : instruments_) {
    if (!ids.insert(inst.id).second) {
      throw DuplicateIdError("instrument id '" + inst.id + "' appears twice");
    }
  }
}

InstrumentStore InstrumentStore::load(std::span<const std::filesystem::path> paths) {
  return InstrumentStore(load_instruments(paths));
}

const Instrument* InstrumentStore::find(std::string_view id) const {
  for (const auto& inst : instruments_) {
    if (inst.id == id) return &inst;
  }
  return nullptr;
}

const Instrument& InstrumentStore::get(std::string_view id) const {
  if (const auto* inst = find(id)) return *inst;
  throw SchemaError("no instrument with id '" + std::string(id) + "'");
}

const Instrument& InstrumentStore::pct() const {
  for (const auto& inst : instruments_) {
    if (inst.kind == InstrumentKind::political) return inst;
  }
  throw SchemaError("no political instrument loaded");
}

namespace {

std::mutex g_data_dir_mutex;
std::filesystem::path g_data_dir;

}  // namespace

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("MORAL_LENS_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  std::lock_guard lock(g_data_dir_mutex);
  if (!g_data_dir.empty()) return g_data_dir;
#ifdef MORAL_LENS_SOURCE_DATA_DIR
  return MORAL_LENS_SOURCE_DATA_DIR;
#else
  return "data";
#endif
}

void set_data_dir(std::filesystem::path dir) {
  std::lock_guard lock(g_data_dir_mutex);
  g_data_dir = std::move(dir);
}

}  // namespace moral_lens
