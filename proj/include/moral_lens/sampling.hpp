#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace moral_lens {

/// Seeded draws that are reproducible across standard libraries. std::mt19937_64
/// output is fixed by the standard, but the distributions are not, so bounded
/// draws are done here by rejection.
class SeededSampler {
 public:
  explicit SeededSampler(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  /// k is clamped to n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace moral_lens
