#include "moral_lens/sampling.hpp"

#include <numeric>
#include <stdexcept>
#include <utility>

namespace moral_lens {

std::uint64_t SeededSampler::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("SeededSampler::below: bound is zero");
  // 2^64 mod bound, computed without overflow.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::vector<std::size_t> SeededSampler::sample_indices(std::size_t n, std::size_t k) {
  if (k > n) k = n;
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace moral_lens
