#include "moral_lens/prompt.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace moral_lens {

namespace detail {
const std::map<std::string, std::string>& embedded_templates();
}  // namespace detail

namespace {

struct TemplateSpec {
  std::string_view name;
  std::set<std::string, std::less<>> placeholders;
  bool pct;  // must end with the output format block
};

const std::array<TemplateSpec, 6>& template_specs() {
  static const std::array<TemplateSpec, 6> kSpecs = {{
      {"base", {"proposition", "options"}, true},
      {"persona", {"stance_verb", "value", "proposition", "options"}, true},
      {"first", {"profile_answers", "proposition", "options"}, true},
      {"third", {"profile_answers", "proposition", "options"}, true},
      {"vote", {"profile_answers", "proposition", "options"}, true},
      {"judge", {"value", "reason"}, false},
  }};
  return kSpecs;
}

struct Placeholder {
  std::size_t begin;
  std::size_t end;
  std::string name;
};

std::vector<Placeholder> scan_placeholders(std::string_view text) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const auto close = text.find("}}", pos + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder");
    out.push_back({pos, close + 2, std::string(text.substr(pos + 2, close - pos - 2))});
    pos = close + 2;
  }
  return out;
}

void validate_template(const TemplateSpec& spec, const std::string& text) {
  const auto found = scan_placeholders(text);
  std::multiset<std::string, std::less<>> names;
  for (const auto& p : found) names.insert(p.name);
  for (const auto& name : names) {
    if (!spec.placeholders.contains(name)) {
      throw TemplateError("template '" + std::string(spec.name) + "' uses unknown placeholder {{" +
                          name + "}}");
    }
  }
  for (const auto& name : spec.placeholders) {
    const auto n = names.count(name);
    if (n != 1) {
      throw TemplateError("template '" + std::string(spec.name) + "' must use {{" + name +
                          "}} exactly once (found " + std::to_string(n) + ")");
    }
  }
  if (spec.pct && !text.ends_with(output_format_block())) {
    throw TemplateError("template '" + std::string(spec.name) +
                        "' must end with the Output Format block");
  }
}

std::string substitute(std::string_view text,
                       const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(text.size() + 1024);
  std::size_t cursor = 0;
  for (const auto& p : scan_placeholders(text)) {
    out.append(text.substr(cursor, p.begin - cursor));
    out.append(values.at(p.name));
    cursor = p.end;
  }
  out.append(text.substr(cursor));
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

TemplateSet::TemplateSet(std::map<std::string, std::string> texts) : texts_(std::move(texts)) {
  for (const auto& spec : template_specs()) {
    auto it = texts_.find(std::string(spec.name));
    if (it == texts_.end()) throw TemplateError("missing template '" + std::string(spec.name) + "'");
    validate_template(spec, it->second);
  }
  for (const auto& [name, _] : texts_) {
    const bool known = std::any_of(template_specs().begin(), template_specs().end(),
                                   [&](const TemplateSpec& s) { return s.name == name; });
    if (!known) throw TemplateError("unknown template '" + name + "'");
  }
}

const TemplateSet& TemplateSet::bundled() {
  static const TemplateSet kBundled(detail::embedded_templates());
  return kBundled;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
  std::map<std::string, std::string> texts;
  for (const auto& spec : template_specs()) {
    const auto path = dir / (std::string(spec.name) + ".txt");
    try {
      texts.emplace(std::string(spec.name), read_text_file(path));
    } catch (const SchemaError&) {
      throw TemplateError("cannot read template " + path.string());
    }
  }
  return TemplateSet(std::move(texts));
}

TemplateSet TemplateSet::from_texts(std::map<std::string, std::string> texts) {
  return TemplateSet(std::move(texts));
}

const std::string& TemplateSet::text(std::string_view name) const {
  auto it = texts_.find(std::string(name));
  if (it == texts_.end()) throw TemplateError("no template '" + std::string(name) + "'");
  return it->second;
}

std::map<std::string, std::string> TemplateSet::digests() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, text] : texts_) out.emplace(name, sha256_hex(text));
  return out;
}

std::string_view template_name(Framing framing) { return to_string(framing); }

const std::string& output_format_block() {
  static const std::string kBlock =
      "**Important**\n"
      "- Your output *must* strictly follow the exact *Output Format* below.\n"
      "- *Do NOT add any extra content.*\n"
      "\n"
      "**Output Format**\n"
      "```json\n"
      "{\n"
      "  \"Opinion\": \"<one of: 1) | 2) | 3) | 4)>\",\n"
      "  \"Brief Reason\": \"<one sentence>\"\n"
      "}\n"
      "```\n";
  return kBlock;
}

std::string render_options() {
  std::string out;
  for (std::size_t i = 0; i < kPctOptionLabels.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += std::to_string(i + 1) + ") " + std::string(kPctOptionLabels[i]);
  }
  return out;
}

std::string render_profile_answers(const ConditioningProfile& profile) {
  std::string out;
  for (std::size_t i = 0; i < profile.assignments.size(); ++i) {
    const auto& a = profile.assignments[i];
    if (i > 0) out.push_back('\n');
    out += "Q" + std::to_string(i + 1) + ": " + a.item.text + " — Answer: " + a.answer;
  }
  return out;
}

PromptText render_prompt(Framing framing, const ConditioningProfile* profile,
                         const PctProposition& proposition, const TemplateSet& templates) {
  if (framing == Framing::base && profile != nullptr) {
    throw ProfileNotAllowedError("the base framing takes no conditioning profile");
  }
  if (framing != Framing::base && profile == nullptr) {
    throw MissingProfileError("framing '" + std::string(to_string(framing)) +
                              "' requires a conditioning profile");
  }
  std::map<std::string, std::string, std::less<>> values = {
      {"proposition", proposition.text},
      {"options", render_options()},
  };
  if (profile != nullptr) {
    values.emplace("stance_verb", std::string(stance_verb(profile->stance)));
    values.emplace("value", profile->value.name);
    values.emplace("profile_answers", render_profile_answers(*profile));
  }
  PromptText out;
  out.body = substitute(templates.text(template_name(framing)), values);
  out.framing = framing;
  if (profile != nullptr) out.profile_ref = profile->id();
  out.proposition_ref = proposition.id;
  return out;
}

PromptText render_judge_prompt(const MoralValue& value, std::string_view reason,
                               const TemplateSet& templates) {
  if (is_blank(reason)) throw EmptyReasonError("brief reason to be rated is empty");
  const std::map<std::string, std::string, std::less<>> values = {
      {"value", value.name},
      {"reason", std::string(reason)},
  };
  PromptText out;
  out.body = substitute(templates.text("judge"), values);
  return out;
}

}  // namespace moral_lens
