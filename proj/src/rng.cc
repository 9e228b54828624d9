#include "fedsim/rng.h"

#include <numeric>

namespace fedsim {

std::vector<std::size_t> ShuffledIndices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(idx);
  return idx;
}

}  // namespace fedsim
