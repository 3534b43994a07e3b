#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/judge.hpp"

using namespace moral_lens;

namespace {

std::vector<ReasonRecord> reasons(std::size_t n, const std::string& value = "Care",
                                  Framing framing = Framing::first) {
  std::vector<ReasonRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int model = static_cast<int>(i / 124);
    const auto stance = (i / 62) % 2 == 0 ? Stance::endorse : Stance::reject;
    out.push_back({CellKey{"m" + std::to_string(model), MoralValue{value}, stance, framing},
                   static_cast<int>(i % 62) + 1, "reason " + value + " " + std::to_string(i)});
  }
  return out;
}

// "reason ... <k>" -> rating from a fixed table keyed by k.
int table_rating(const std::string& body) {
  const auto pos = body.find("Brief Reason: reason ");
  const auto line_end = body.find('\n', pos);
  const auto tail = body.substr(pos, line_end - pos);
  const int k = std::stoi(tail.substr(tail.rfind(' ') + 1));
  return 1 + (k * 7 + 3) % 5;
}

struct JudgeRig {
  std::shared_ptr<ScriptedBackend> backend;
  ModelGateway gateway{GatewayMode::live, std::make_shared<ReplayCache>(),
                       RetryPolicy{1, std::chrono::milliseconds(1), 1.0}};
  JudgeTarget target{"judge", "judge-model", DecodeConfig{}};

  explicit JudgeRig(ScriptedBackend::Responder r)
      : backend(std::make_shared<ScriptedBackend>("judge", std::move(r), 8)) {
    gateway.add_backend(backend);
  }
};

}  // namespace

TEST(Judge, SampleIsDistinctAndDeterministic) {
  const auto pool = reasons(500);
  const auto a = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 200, 17);
  const auto b = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 200, 17);
  ASSERT_EQ(a.reasons.size(), 200u);
  EXPECT_FALSE(a.shortfall);
  EXPECT_EQ(a.available, 500u);
  std::set<std::string> distinct;
  for (const auto& r : a.reasons) distinct.insert(r.reason);
  EXPECT_EQ(distinct.size(), 200u);
  for (std::size_t i = 0; i < a.reasons.size(); ++i) EXPECT_EQ(a.reasons[i].reason, b.reasons[i].reason);

  const auto c = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 200, 18);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 200; ++i) same += a.reasons[i].reason == c.reasons[i].reason;
  EXPECT_LT(same, 200u);
}

TEST(Judge, SampleIgnoresCollectionOrder) {
  auto pool = reasons(300);
  const auto a = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 50, 5);
  std::mt19937_64 rng(1);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto b = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 50, 5);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.reasons[i].reason, b.reasons[i].reason);
}

TEST(Judge, ShortfallAndFiltering) {
  auto pool = reasons(150);
  const auto other_value = reasons(100, "Loyalty");
  const auto other_framing = reasons(100, "Care", Framing::vote);
  pool.insert(pool.end(), other_value.begin(), other_value.end());
  pool.insert(pool.end(), other_framing.begin(), other_framing.end());
  const auto s = sample_reasons(pool, MoralValue{"Care"}, Framing::first, 200, 1);
  EXPECT_EQ(s.reasons.size(), 150u);
  EXPECT_TRUE(s.shortfall);
  EXPECT_EQ(s.available, 150u);
  for (const auto& r : s.reasons) {
    EXPECT_EQ(r.cell.value, MoralValue{"Care"});
    EXPECT_EQ(r.cell.framing, Framing::first);
  }
  EXPECT_THROW(sample_reasons(pool, MoralValue{"Purity"}, Framing::first, 10, 1), NoReasonsError);
  EXPECT_THROW(sample_reasons({}, MoralValue{"Care"}, Framing::first, 10, 1), NoReasonsError);
}

TEST(Judge, AllFours) {
  JudgeRig rig([](const std::string&, const std::string&, int) { return "{\"rating\": 4}"; });
  const auto s = sample_reasons(reasons(40), MoralValue{"Care"}, Framing::first, 25, 3);
  const auto r = rate_sample(s, rig.gateway, rig.target);
  ASSERT_TRUE(r.mean.has_value());
  EXPECT_EQ(*r.mean, 4.0);
  EXPECT_EQ(r.rated, 25u);
  EXPECT_EQ(r.failures, 0u);
  EXPECT_EQ(r.judge_model, "judge-model");
}

TEST(Judge, ThreeAndFive) {
  JudgeRig rig([](const std::string&, const std::string& body, int) {
    return body.find("reason Care 0\n") != std::string::npos ? "{\"rating\": 3}" : "```json\n{\"rating\": 5}\n```";
  });
  const auto s = sample_reasons(reasons(2), MoralValue{"Care"}, Framing::first, 2, 3);
  const auto r = rate_sample(s, rig.gateway, rig.target);
  EXPECT_EQ(*r.mean, 4.0);
}

TEST(Judge, FixtureTableMeanMatchesHandSum) {
  JudgeRig rig([](const std::string&, const std::string& body, int) {
    return "{\"rating\": " + std::to_string(table_rating(body)) + "}";
  });
  const auto s = sample_reasons(reasons(400), MoralValue{"Care"}, Framing::first, 200, 11);
  const auto r = rate_sample(s, rig.gateway, rig.target, TemplateSet::bundled(), 8);
  long sum = 0;
  for (const auto& item : s.reasons) {
    const int k = std::stoi(item.reason.substr(item.reason.rfind(' ') + 1));
    sum += 1 + (k * 7 + 3) % 5;
  }
  EXPECT_EQ(*r.mean, static_cast<double>(sum) / 200.0);
  EXPECT_GE(*r.mean, 1.0);
  EXPECT_LE(*r.mean, 5.0);
  // Per-item ratings line up with the draw order.
  for (std::size_t i = 0; i < r.items.size(); ++i) EXPECT_EQ(r.items[i].item.reason, s.reasons[i].reason);
}

TEST(Judge, ItemFailuresDoNotAbortTheBatch) {
  JudgeRig rig([](const std::string&, const std::string& body, int) -> std::string {
    if (body.find("reason Care 1\n") != std::string::npos) return "{\"rating\": 9}";
    if (body.find("reason Care 2\n") != std::string::npos) return "no json";
    if (body.find("reason Care 3\n") != std::string::npos) throw TransportError("down", false);
    return "{\"rating\": 2}";
  });
  const auto s = sample_reasons(reasons(6), MoralValue{"Care"}, Framing::first, 6, 3);
  const auto r = rate_sample(s, rig.gateway, rig.target);
  EXPECT_EQ(r.rated, 3u);
  EXPECT_EQ(r.failures, 3u);
  EXPECT_EQ(*r.mean, 2.0);
  std::multiset<std::string> codes;
  for (const auto& i : r.items) {
    if (!i.rating) codes.insert(i.error_code);
  }
  EXPECT_EQ(codes, (std::multiset<std::string>{"NoJsonError", "RatingRangeError", "TransportError"}));
}

TEST(Judge, AllFailedLeavesMeanUnset) {
  JudgeRig rig([](const std::string&, const std::string&, int) { return "{\"rating\": 0}"; });
  const auto s = sample_reasons(reasons(3), MoralValue{"Care"}, Framing::first, 3, 3);
  const auto r = rate_sample(s, rig.gateway, rig.target);
  EXPECT_FALSE(r.mean.has_value());
  EXPECT_EQ(r.failures, 3u);
  const auto csv = judge_csv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "value,framing,judge_model,mean,rated,failures,available,shortfall");
}

TEST(Judge, ReplayReproducesMean) {
  auto cache = std::make_shared<ReplayCache>();
  const auto s = sample_reasons(reasons(120), MoralValue{"Care"}, Framing::first, 60, 9);
  const auto responder = [](const std::string&, const std::string& body, int) {
    return "{\"rating\": " + std::to_string(table_rating(body)) + "}";
  };
  ModelGateway live(GatewayMode::live, cache);
  live.add_backend(std::make_shared<ScriptedBackend>("judge", responder));
  ModelGateway replay(GatewayMode::replay, cache);
  replay.add_backend(std::make_shared<ScriptedBackend>("judge", nullptr));
  const JudgeTarget t{"judge", "jm", DecodeConfig{}};
  const auto a = rate_sample(s, live, t);
  const auto b = rate_sample(s, replay, t);
  EXPECT_EQ(*a.mean, *b.mean);
  EXPECT_EQ(replay.backend_calls(), 0u);
  EXPECT_EQ(judge_json({a}), judge_json({b}));
}
