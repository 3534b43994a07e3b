#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "moral_lens/instrument.hpp"
#include "moral_lens/types.hpp"

namespace moral_lens {

struct PromptText {
  std::string body;
  /// Unset for judge prompts.
  std::optional<Framing> framing;
  std::optional<std::string> profile_ref;
  std::optional<int> proposition_ref;
};

/// The six prompt templates (base, persona, first, third, vote, judge) with
/// `{{name}}` placeholders. Each template's placeholder set is fixed and is
/// checked when the set is constructed.
class TemplateSet {
 public:
  /// Templates compiled into the library from data/templates.
  static const TemplateSet& bundled();
  /// Reads `<dir>/<name>.txt` for every template name.
  static TemplateSet load_directory(const std::filesystem::path& dir);
  static TemplateSet from_texts(std::map<std::string, std::string> texts);

  const std::string& text(std::string_view name) const;
  const std::map<std::string, std::string>& texts() const { return texts_; }
  /// name -> sha256 of the template text.
  std::map<std::string, std::string> digests() const;

 private:
  explicit TemplateSet(std::map<std::string, std::string> texts);
  std::map<std::string, std::string> texts_;
};

/// Template name for a framing ("base", "persona", ...).
std::string_view template_name(Framing framing);

/// The fixed Important + Output Format block every PCT prompt ends with.
const std::string& output_format_block();

/// "1) Strongly disagree" ... "4) Strongly agree", one per line.
std::string render_options();

/// Numbered "Qk: <item text> — Answer: <label>" lines for the profile.
std::string render_profile_answers(const ConditioningProfile& profile);

/// Renders a PCT prompt. `profile` must be null exactly when framing is base.
PromptText render_prompt(Framing framing, const ConditioningProfile* profile,
                         const PctProposition& proposition,
                         const TemplateSet& templates = TemplateSet::bundled());

/// Renders the 1-5 grounding rubric for one brief reason.
PromptText render_judge_prompt(const MoralValue& value, std::string_view reason,
                               const TemplateSet& templates = TemplateSet::bundled());

}  // namespace moral_lens
