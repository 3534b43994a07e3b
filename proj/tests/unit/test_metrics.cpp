#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/metrics.hpp"
#include "moral_lens/util.hpp"
#include "oracles.hpp"

using namespace moral_lens;

namespace {

// Ensemble from raw shift vectors; reject at the origin-offset point so flips
// are not accidentally triggered.
ShiftEnsemble from_shifts(const std::vector<std::pair<double, double>>& shifts) {
  ShiftEnsemble ens(MoralValue{"Utilitarianism"}, Framing::first);
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    ens.add(ShiftEntry::from_coordinates("m" + std::to_string(i), {1.0, 1.0},
                                         {1.0 + shifts[i].first, 1.0 + shifts[i].second}));
  }
  return ens;
}

PctResponseSet labels(const std::vector<int>& ls) {
  PctResponseSet s;
  for (std::size_t i = 0; i < ls.size(); ++i) s.answers[static_cast<int>(i) + 1] = ls[i];
  return s;
}

}  // namespace

TEST(Metrics, MeanShiftExamples) {
  const auto m = mean_shift(from_shifts({{2, 2}, {4, 0}}));
  EXPECT_DOUBLE_EQ(m.economic, 3);
  EXPECT_DOUBLE_EQ(m.social, 1);
  const auto one = mean_shift(from_shifts({{-1.25, 3.5}}));
  EXPECT_DOUBLE_EQ(one.economic, -1.25);
  EXPECT_DOUBLE_EQ(one.social, 3.5);
}

TEST(Metrics, MeanMagnitudeExamples) {
  EXPECT_DOUBLE_EQ(mean_magnitude(from_shifts({{3, 4}})), 5.0);
  const auto ens = from_shifts({{1, 0}, {-1, 0}});
  EXPECT_DOUBLE_EQ(mean_magnitude(ens), 1.0);
  const auto m = mean_shift(ens);
  EXPECT_DOUBLE_EQ(std::hypot(m.economic, m.social), 0.0);
}

TEST(Metrics, DirectionalBiasExamples) {
  std::vector<std::pair<double, double>> s(11, {0.5, -1});
  s.push_back({0.0, -1});
  const auto b = directional_bias(from_shifts(s));
  EXPECT_DOUBLE_EQ(b.economic, 11.0 / 12.0);
  EXPECT_EQ(format_fixed(b.economic, 2), "0.92");
  EXPECT_DOUBLE_EQ(b.social, -1.0);
  EXPECT_DOUBLE_EQ(directional_bias(from_shifts({{1, 1}, {-1, -1}})).economic, 0.0);
}

TEST(Metrics, FlipRateExamples) {
  ShiftEnsemble ens(MoralValue{"Care"}, Framing::vote);
  ens.add(ShiftEntry::from_coordinates("a", {-3, 0}, {2, 5}));
  EXPECT_DOUBLE_EQ(flip_rate(ens, Axis::economic), 1.0);
  EXPECT_DOUBLE_EQ(flip_rate(ens, Axis::social), 0.0);  // 0 -> 5 is not a crossing
  ens.add(ShiftEntry::from_coordinates("b", {1, 2}, {3, -2}));
  EXPECT_DOUBLE_EQ(flip_rate(ens, Axis::economic), 0.5);
  EXPECT_DOUBLE_EQ(flip_rate(ens, Axis::social), 0.5);
}

TEST(Metrics, MrlExamples) {
  EXPECT_NEAR(mrl(from_shifts({{2, 1}, {4, 2}, {0.2, 0.1}})).value, 1.0, 1e-15);
  EXPECT_NEAR(mrl(from_shifts({{1, 0}, {0, 1}})).value, std::sqrt(2.0) / 2, 1e-15);
  EXPECT_NEAR(mrl(from_shifts({{1, 0}, {-1, 0}})).value, 0.0, 1e-15);
  const auto r = mrl(from_shifts({{1, 0}, {0, 0}, {3, 0}}));
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_THROW(mrl(from_shifts({{0, 0}, {0, 0}})), AllZeroShiftsError);
}

TEST(Metrics, DispersionExamples) {
  ShiftEnsemble one(MoralValue{"Care"}, Framing::first);
  one.add(ShiftEntry::from_coordinates("a", {2, -3}, {0, 0}));
  const auto d1 = dispersion(one, Condition::reject);
  EXPECT_DOUBLE_EQ(d1.rms, 0.0);
  EXPECT_EQ(d1.centroid, (Coordinates{2, -3}));

  ShiftEnsemble two(MoralValue{"Care"}, Framing::first);
  two.add(ShiftEntry::from_coordinates("a", {0, 0}, {-1, 5}));
  two.add(ShiftEntry::from_coordinates("b", {0, 0}, {1, 5}));
  const auto d2 = dispersion(two, Condition::endorse);
  EXPECT_DOUBLE_EQ(d2.rms, 1.0);
  EXPECT_EQ(d2.centroid, (Coordinates{0, 5}));
}

TEST(Metrics, EmptyEnsemble) {
  const ShiftEnsemble e(MoralValue{"Care"}, Framing::first);
  EXPECT_THROW(mean_shift(e), EmptyEnsembleError);
  EXPECT_THROW(mean_magnitude(e), EmptyEnsembleError);
  EXPECT_THROW(directional_bias(e), EmptyEnsembleError);
  EXPECT_THROW(flip_rate(e, Axis::social), EmptyEnsembleError);
  EXPECT_THROW(mrl(e), EmptyEnsembleError);
  EXPECT_THROW(dispersion(e, Condition::reject), EmptyEnsembleError);
  EXPECT_THROW(summarize(e), EmptyEnsembleError);
}

TEST(Metrics, DuplicateModel) {
  auto ens = from_shifts({{1, 1}});
  EXPECT_THROW(ens.add(ShiftEntry::from_coordinates("m0", {0, 0}, {1, 1})), DuplicateIdError);
}

TEST(Metrics, ResponseRates) {
  EXPECT_DOUBLE_EQ(strong_response_rate(labels({1, 2, 3, 4, 4})), 0.6);
  EXPECT_DOUBLE_EQ(strong_response_rate(labels({2, 3, 3, 2})), 0.0);
  EXPECT_DOUBLE_EQ(strong_response_rate(labels({1, 1, 1})), 1.0);
  EXPECT_THROW(strong_response_rate(PctResponseSet{}), EmptyResponsesError);

  EXPECT_DOUBLE_EQ(stance_reversal_rate(labels({2}), labels({3})), 1.0);
  EXPECT_DOUBLE_EQ(stance_reversal_rate(labels({2}), labels({1})), 0.0);
  EXPECT_DOUBLE_EQ(stance_reversal_rate(labels({1, 2, 3, 4}), labels({1, 2, 3, 4})), 0.0);
  EXPECT_DOUBLE_EQ(stance_reversal_rate(labels({1, 2, 3, 4}), labels({4, 2, 3, 1})), 0.5);

  EXPECT_DOUBLE_EQ(mean_abs_distance(labels({4, 1}), labels({3, 3})), 1.5);
  EXPECT_DOUBLE_EQ(mean_abs_distance(labels({2, 2}), labels({2, 2})), 0.0);
  EXPECT_DOUBLE_EQ(mean_abs_distance(labels(std::vector<int>(62, 1)), labels(std::vector<int>(62, 4))), 3.0);

  PctResponseSet other;
  other.answers[40] = 2;
  EXPECT_THROW(mean_abs_distance(labels({1}), other), NoSharedItemsError);
  EXPECT_THROW(stance_reversal_rate(labels({1}), other), NoSharedItemsError);
}

TEST(Metrics, OracleAgreementOnRandomEnsembles) {
  std::mt19937_64 rng(1234);
  for (int t = 0; t < 1000; ++t) {
    const auto ms = oracle::random_ensemble(rng);
    const auto ens = oracle::to_ensemble(ms);
    const auto [oe, os] = oracle::mean_shift(ms);
    const auto ms_lib = mean_shift(ens);
    ASSERT_NEAR(ms_lib.economic, oe, 1e-9);
    ASSERT_NEAR(ms_lib.social, os, 1e-9);
    ASSERT_NEAR(mean_magnitude(ens), oracle::mean_magnitude(ms), 1e-9);
    const auto [be, bs] = oracle::directional_bias(ms);
    ASSERT_NEAR(directional_bias(ens).economic, be, 1e-9);
    ASSERT_NEAR(directional_bias(ens).social, bs, 1e-9);
    const auto [fe, fs] = oracle::flip_rate(ms);
    ASSERT_NEAR(flip_rate(ens, Axis::economic), fe, 1e-9);
    ASSERT_NEAR(flip_rate(ens, Axis::social), fs, 1e-9);
    std::size_t excluded = 0;
    const double want = oracle::mrl(ms, &excluded);
    if (want < 0) {
      ASSERT_THROW(mrl(ens), AllZeroShiftsError);
    } else {
      const auto got = mrl(ens);
      ASSERT_NEAR(got.value, want, 1e-9);
      ASSERT_EQ(got.excluded, excluded);
    }
    for (auto cond : {Condition::reject, Condition::endorse}) {
      std::vector<oracle::Pt> pts;
      for (const auto& m : ms) pts.push_back(cond == Condition::reject ? m.rej : m.eds);
      const auto d = dispersion(ens, cond);
      const auto c = oracle::centroid(pts);
      ASSERT_NEAR(d.centroid.economic, c.e, 1e-9);
      ASSERT_NEAR(d.centroid.social, c.s, 1e-9);
      ASSERT_NEAR(d.rms, oracle::rms(pts), 1e-9);
    }
  }
}

TEST(Metrics, BoundsOnFuzzedEnsembles) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 2000; ++t) {
    const auto ms = oracle::random_ensemble(rng);
    const auto ens = oracle::to_ensemble(ms);
    const auto s = summarize(ens);
    for (double v : {s.directional_bias.economic, s.directional_bias.social}) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
    for (double v : {s.flip_rate.economic, s.flip_rate.social}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    ASSERT_GE(s.mean_magnitude + 1e-12, std::hypot(s.mean_shift.economic, s.mean_shift.social));
    ASSERT_GE(s.dispersion_reject, 0.0);
    ASSERT_GE(s.dispersion_endorse, 0.0);
    if (!s.mrl) continue;
    ASSERT_GE(*s.mrl, 0.0);
    ASSERT_LE(*s.mrl, 1.0);

    // Positive per-entry rescaling of the shifts leaves the MRL unchanged.
    ShiftEnsemble scaled(ens.value(), ens.framing());
    for (const auto& e : ens.entries()) {
      const double k = scale(rng);
      scaled.add(ShiftEntry::from_coordinates(
          e.model_id, {0, 0}, {e.delta.d_economic * k, e.delta.d_social * k}));
    }
    ASSERT_NEAR(mrl(scaled).value, *s.mrl, 1e-12);
  }
}

TEST(Metrics, SummaryAllZeroShiftsLeavesMrlUnset) {
  const auto s = summarize(from_shifts({{0, 0}, {0, 0}}));
  EXPECT_FALSE(s.mrl.has_value());
  EXPECT_EQ(s.mrl_excluded, 2u);
}

TEST(Metrics, Serialization) {
  const auto s = summarize(from_shifts({{2, 2}, {4, 0}}));
  const auto csv = metrics_csv({s});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "value,framing,n,mean_shift_e,mean_shift_s,mean_magnitude,sign_e,sign_s,flip_e,flip_s,"
            "mrl,mrl_excluded,centroid_rej_e,centroid_rej_s,centroid_eds_e,centroid_eds_s,rms_rej,rms_eds");
  EXPECT_NE(csv.find("\nUtilitarianism,PT-frt,2,3,1,"), std::string::npos);
  const auto j = nlohmann::json::parse(metrics_json({s}));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j[0]["n"], 2);
  EXPECT_DOUBLE_EQ(j[0]["mean_shift"][0].get<double>(), 3.0);
}
