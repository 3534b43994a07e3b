#include <gtest/gtest.h>

#include <map>
#include <set>

#include "moral_lens/errors.hpp"
#include "moral_lens/prompt.hpp"
#include "moral_lens/util.hpp"
#include "test_util.hpp"

using namespace moral_lens;
using testutil::instrument_path;

namespace {

const Instrument& pct() {
  static const Instrument i = load_instrument(instrument_path("pct"));
  return i;
}

const Instrument& inst(const std::string& name) {
  static std::map<std::string, Instrument> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, load_instrument(instrument_path(name))).first;
  return it->second;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Prompt, VoteFramingSignature) {
  const auto p = build_profile(inst("factual_dilemmas"), MoralValue{"Utilitarianism"}, Stance::endorse);
  const auto out = render_prompt(Framing::vote, &p, pct().proposition(12));
  EXPECT_NE(out.body.find("You are a political strategist working for a party"), std::string::npos);
  EXPECT_EQ(out.proposition_ref, 12);
  EXPECT_EQ(out.profile_ref, "factual_dilemmas:Utilitarianism:endorse");
  // Options appear once, inside the positions list.
  EXPECT_EQ(count(out.body, "1) Strongly disagree"), 1u);
}

TEST(Prompt, PersonaRejects) {
  const auto p = build_profile(inst("mfq"), MoralValue{"Care"}, Stance::reject);
  const auto out = render_prompt(Framing::persona, &p, pct().proposition(1));
  EXPECT_NE(out.body.find("You are a person who strongly rejects Care."), std::string::npos);
}

TEST(Prompt, BaseIsPropositionOptionsAndOutputBlock) {
  const auto out = render_prompt(Framing::base, nullptr, pct().proposition(1));
  EXPECT_NE(out.body.find(pct().proposition(1).text), std::string::npos);
  EXPECT_NE(out.body.find(render_options()), std::string::npos);
  EXPECT_EQ(out.body.find("moral orientation"), std::string::npos);
  EXPECT_EQ(out.body.find("Answer:"), std::string::npos);
  EXPECT_FALSE(out.profile_ref.has_value());
}

TEST(Prompt, ProfileRules) {
  const auto p = build_profile(inst("ous"), MoralValue{"Utilitarianism"}, Stance::endorse);
  EXPECT_THROW(render_prompt(Framing::base, &p, pct().proposition(1)), ProfileNotAllowedError);
  for (auto f : {Framing::persona, Framing::first, Framing::third, Framing::vote}) {
    EXPECT_THROW(render_prompt(f, nullptr, pct().proposition(1)), MissingProfileError);
  }
}

TEST(Prompt, BodyInvariantsOverAllFramingsProfilesAndPropositions) {
  for (const auto& name : {"mfq", "ous", "factual_dilemmas"}) {
    const auto& moral = inst(name);
    for (const auto& v : moral.values()) {
      for (auto stance : {Stance::endorse, Stance::reject}) {
        const auto p = build_profile(moral, v, stance);
        for (auto f : kAllFramings) {
          for (const auto& prop : pct().propositions) {
            const auto body = render_prompt(f, f == Framing::base ? nullptr : &p, prop).body;
            ASSERT_EQ(count(body, prop.text), 1u) << name << " " << prop.id;
            ASSERT_TRUE(body.ends_with(output_format_block()));
            if (f == Framing::first || f == Framing::third || f == Framing::vote) {
              for (std::size_t k = 0; k < p.assignments.size(); ++k) {
                const auto& a = p.assignments[k];
                const auto line = "Q" + std::to_string(k + 1) + ": " + a.item.text + " — Answer: " + a.answer;
                ASSERT_NE(body.find(line), std::string::npos);
              }
            }
          }
        }
      }
    }
  }
}

TEST(Prompt, StanceChangesAnAssignedAnswerToken) {
  for (const auto& name : {"mfq", "ous", "factual_dilemmas"}) {
    for (const auto& v : inst(name).values()) {
      const auto e = build_profile(inst(name), v, Stance::endorse);
      const auto r = build_profile(inst(name), v, Stance::reject);
      for (auto f : {Framing::persona, Framing::first, Framing::third, Framing::vote}) {
        for (int pid : {1, 31, 62}) {
          EXPECT_NE(render_prompt(f, &e, pct().proposition(pid)).body,
                    render_prompt(f, &r, pct().proposition(pid)).body);
        }
      }
    }
  }
}

TEST(Prompt, Deterministic) {
  const auto p = build_profile(inst("mfq"), MoralValue{"Loyalty"}, Stance::endorse);
  EXPECT_EQ(render_prompt(Framing::third, &p, pct().proposition(7)).body,
            render_prompt(Framing::third, &p, pct().proposition(7)).body);
}

TEST(Prompt, GoldenFiles) {
  for (auto f : kAllFramings) {
    for (int pid : testutil::kGoldenPropositions) {
      const auto path = testutil::golden_dir() / "prompts" / testutil::golden_prompt_name(f, pid);
      EXPECT_EQ(testutil::render_golden_prompt(f, pid), read_text_file(path)) << path;
    }
  }
}

TEST(Prompt, JudgePrompt) {
  const auto out = render_judge_prompt(MoralValue{"Care"}, "Compassion requires aid");
  EXPECT_NE(out.body.find("Return an integer rating 1-5"), std::string::npos);
  EXPECT_NE(out.body.find("5 = Clearly and strongly based on the value"), std::string::npos);
  EXPECT_NE(out.body.find("Moral Value: Care\nBrief Reason: Compassion requires aid\n"), std::string::npos);
  EXPECT_EQ(out.body, render_judge_prompt(MoralValue{"Care"}, "Compassion requires aid").body);
  EXPECT_THROW(render_judge_prompt(MoralValue{"Utilitarianism"}, ""), EmptyReasonError);
  EXPECT_THROW(render_judge_prompt(MoralValue{"Utilitarianism"}, "  \n"), EmptyReasonError);
}

TEST(Prompt, PlaceholderValuesAreNotReexpanded) {
  // A reason that looks like a placeholder must come through literally.
  const auto out = render_judge_prompt(MoralValue{"Care"}, "{{value}}");
  EXPECT_NE(out.body.find("Brief Reason: {{value}}"), std::string::npos);
}

TEST(Prompt, TemplateValidation) {
  auto texts = TemplateSet::bundled().texts();
  EXPECT_NO_THROW(TemplateSet::from_texts(texts));

  auto missing = texts;
  missing.erase("vote");
  EXPECT_THROW(TemplateSet::from_texts(missing), TemplateError);

  auto unknown = texts;
  unknown["base"] = "{{nope}}\n" + unknown["base"];
  EXPECT_THROW(TemplateSet::from_texts(unknown), TemplateError);

  auto twice = texts;
  twice["base"] = "{{proposition}}\n" + twice["base"];
  EXPECT_THROW(TemplateSet::from_texts(twice), TemplateError);

  auto no_block = texts;
  no_block["first"] += "trailing";
  EXPECT_THROW(TemplateSet::from_texts(no_block), TemplateError);

  auto extra = texts;
  extra["system"] = "x";
  EXPECT_THROW(TemplateSet::from_texts(extra), TemplateError);
}

TEST(Prompt, BundledTemplatesMatchDataDirectory) {
  const auto on_disk = TemplateSet::load_directory(data_dir() / "templates");
  EXPECT_EQ(on_disk.texts(), TemplateSet::bundled().texts());
}
