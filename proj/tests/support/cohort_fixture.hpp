#pragma once

// Synthetic participant tables plus a from-scratch version of the grouping,
// seeded sampling and centroid steps, used to cross-check cohort code.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "moral_lens/cohort.hpp"
#include "moral_lens/compass.hpp"
#include "moral_lens/instrument.hpp"

namespace cohort_fixture {

// Every participant answers the full PCT. Moral items are answered with a
// per-participant lean; about one in ten items is left blank.
inline std::vector<moral_lens::Participant> synthetic(const moral_lens::Instrument& moral, std::size_t n,
                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> label(1, 4);
  std::vector<moral_lens::Participant> out;
  for (std::size_t i = 0; i < n; ++i) {
    moral_lens::Participant p;
    p.id = "P" + std::to_string(1000 + i);
    const double lean = u(rng);
    for (const auto& item : moral.items) {
      if (u(rng) < 0.1) continue;
      p.moral_answers[item.id] =
          u(rng) < lean ? item.endorse_answer : moral_lens::complement_label(item.endorse_answer);
    }
    for (int k = 1; k <= 62; ++k) p.pct_answers[k] = label(rng);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string to_csv(const std::vector<moral_lens::Participant>& ps, const moral_lens::Instrument& moral) {
  std::string s = "participant_id";
  for (const auto& item : moral.items) s += "," + item.id;
  for (int k = 1; k <= 62; ++k) s += ",pct_" + std::to_string(k);
  s += "\n";
  for (const auto& p : ps) {
    s += p.id;
    for (const auto& item : moral.items) {
      s += ",";
      auto it = p.moral_answers.find(item.id);
      if (it != p.moral_answers.end()) s += it->second;
    }
    for (int k = 1; k <= 62; ++k) s += "," + std::to_string(p.pct_answers.at(k));
    s += "\n";
  }
  return s;
}

struct Expected {
  std::vector<std::string> endorsement_ids;
  std::vector<std::string> rejection_ids;
  moral_lens::Coordinates endorsement;
  moral_lens::Coordinates rejection;
};

// Uniform draw in [0, bound): reject raw outputs below 2^64 mod bound.
inline std::uint64_t draw(std::mt19937_64& eng, std::uint64_t bound) {
  const unsigned __int128 two64 = static_cast<unsigned __int128>(1) << 64;
  const auto floor_cut = static_cast<std::uint64_t>(two64 % bound);
  for (;;) {
    const std::uint64_t r = eng();
    if (r >= floor_cut) return r % bound;
  }
}

inline std::vector<std::string> pick(std::mt19937_64& eng, std::vector<std::string> ids, std::size_t k) {
  std::vector<std::string> chosen;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + draw(eng, ids.size() - i);
    std::swap(ids[i], ids[j]);
    chosen.push_back(ids[i]);
  }
  return chosen;
}

inline moral_lens::Coordinates centroid(const std::vector<std::string>& ids,
                                        const std::vector<moral_lens::Participant>& ps,
                                        const moral_lens::WeightTable& w) {
  double e = 0, s = 0;
  for (const auto& id : ids) {
    for (const auto& p : ps) {
      if (p.id != id) continue;
      double se = 0, ss = 0;
      for (int k = 1; k <= 62; ++k) {
        se += w.contribution(k, p.pct_answers.at(k))[0];
        ss += w.contribution(k, p.pct_answers.at(k))[1];
      }
      e += w.economic_normalization().scale * se + w.economic_normalization().offset;
      s += w.social_normalization().scale * ss + w.social_normalization().offset;
    }
  }
  return {e / static_cast<double>(ids.size()), s / static_cast<double>(ids.size())};
}

inline Expected brute_force(const std::vector<moral_lens::Participant>& ps, const moral_lens::Instrument& moral,
                            const std::string& value, std::size_t n, std::uint64_t seed,
                            const moral_lens::WeightTable& w) {
  std::vector<std::string> yes, no;
  for (const auto& p : ps) {
    int plus = 0, minus = 0;
    for (const auto& item : moral.items) {
      if (item.value_tag.name != value) continue;
      auto it = p.moral_answers.find(item.id);
      if (it == p.moral_answers.end()) continue;
      (it->second == item.endorse_answer ? plus : minus) += 1;
    }
    if (plus + minus == 0) continue;
    (plus > minus ? yes : no).push_back(p.id);
  }
  std::mt19937_64 eng(seed);
  Expected out;
  out.endorsement_ids = pick(eng, yes, n);
  out.rejection_ids = pick(eng, no, n);
  out.endorsement = centroid(out.endorsement_ids, ps, w);
  out.rejection = centroid(out.rejection_ids, ps, w);
  return out;
}

}  // namespace cohort_fixture
