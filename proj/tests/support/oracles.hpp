#pragma once

// Brute-force reference implementations used to cross-check the library.
// They deliberately use different formulations from the production code
// (angles instead of unit vectors, pairwise distances instead of centroids).

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "moral_lens/metrics.hpp"

namespace oracle {

struct Pt {
  double e;
  double s;
};

struct Model {
  Pt rej;
  Pt eds;
};

inline double mean_of(const std::vector<double>& xs) {
  long double acc = 0;
  for (double x : xs) acc += x;
  return static_cast<double>(acc / static_cast<long double>(xs.size()));
}

inline std::pair<double, double> mean_shift(const std::vector<Model>& ms) {
  std::vector<double> de, ds;
  for (const auto& m : ms) {
    de.push_back(m.eds.e - m.rej.e);
    ds.push_back(m.eds.s - m.rej.s);
  }
  return {mean_of(de), mean_of(ds)};
}

inline double mean_magnitude(const std::vector<Model>& ms) {
  std::vector<double> r;
  for (const auto& m : ms) {
    const double a = m.eds.e - m.rej.e;
    const double b = m.eds.s - m.rej.s;
    r.push_back(std::sqrt(a * a + b * b));
  }
  return mean_of(r);
}

inline double sgn(double x) {
  if (x > 0) return 1.0;
  if (x < 0) return -1.0;
  return 0.0;
}

inline std::pair<double, double> directional_bias(const std::vector<Model>& ms) {
  std::vector<double> se, ss;
  for (const auto& m : ms) {
    se.push_back(sgn(m.eds.e - m.rej.e));
    ss.push_back(sgn(m.eds.s - m.rej.s));
  }
  return {mean_of(se), mean_of(ss)};
}

inline std::pair<double, double> flip_rate(const std::vector<Model>& ms) {
  double fe = 0, fs = 0;
  for (const auto& m : ms) {
    if (m.rej.e * m.eds.e < 0) fe += 1;  // opposite signs, neither zero
    if (m.rej.s * m.eds.s < 0) fs += 1;
  }
  return {fe / ms.size(), fs / ms.size()};
}

// Mean resultant length from shift angles. Returns -1 when all shifts are zero.
inline double mrl(const std::vector<Model>& ms, std::size_t* excluded = nullptr) {
  double c = 0, s = 0;
  std::size_t n = 0, z = 0;
  for (const auto& m : ms) {
    const double a = m.eds.e - m.rej.e;
    const double b = m.eds.s - m.rej.s;
    if (a == 0 && b == 0) {
      ++z;
      continue;
    }
    const double theta = std::atan2(b, a);
    c += std::cos(theta);
    s += std::sin(theta);
    ++n;
  }
  if (excluded) *excluded = z;
  if (n == 0) return -1;
  return std::sqrt(c * c + s * s) / n;
}

// RMS distance to the centroid via the pairwise identity
// mean ||p - c||^2 = (1 / 2N^2) sum_i sum_j ||p_i - p_j||^2.
inline double rms(const std::vector<Pt>& ps) {
  double acc = 0;
  for (const auto& p : ps) {
    for (const auto& q : ps) acc += (p.e - q.e) * (p.e - q.e) + (p.s - q.s) * (p.s - q.s);
  }
  const double n = static_cast<double>(ps.size());
  return std::sqrt(acc / (2 * n * n));
}

inline Pt centroid(const std::vector<Pt>& ps) {
  std::vector<double> e, s;
  for (const auto& p : ps) {
    e.push_back(p.e);
    s.push_back(p.s);
  }
  return {mean_of(e), mean_of(s)};
}

// Random ensemble in [-10, 10]^2. About a third of the coordinates are snapped
// to a coarse grid so that zero shifts, zero endpoints and ties show up.
inline std::vector<Model> random_ensemble(std::mt19937_64& rng, std::size_t max_n = 12) {
  std::uniform_int_distribution<std::size_t> size(1, max_n);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  std::uniform_int_distribution<int> grid(-4, 4);
  std::uniform_int_distribution<int> mode(0, 5);
  const auto draw = [&]() {
    return mode(rng) < 2 ? grid(rng) * 2.5 : coord(rng);
  };
  std::vector<Model> out(size(rng));
  for (auto& m : out) {
    m.rej = {draw(), draw()};
    if (mode(rng) == 0) {
      m.eds = m.rej;  // zero shift
    } else {
      m.eds = {draw(), draw()};
    }
  }
  return out;
}

inline moral_lens::ShiftEnsemble to_ensemble(const std::vector<Model>& ms) {
  moral_lens::ShiftEnsemble ens(moral_lens::MoralValue{"Care"}, moral_lens::Framing::first);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    ens.add(moral_lens::ShiftEntry::from_coordinates("m" + std::to_string(i), {ms[i].rej.e, ms[i].rej.s},
                                                     {ms[i].eds.e, ms[i].eds.s}));
  }
  return ens;
}

}  // namespace oracle
