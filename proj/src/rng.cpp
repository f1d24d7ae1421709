#include "brtm/rng.hpp"

#include <limits>

namespace brtm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0xD1B54A32D192ED03ULL));
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_closed_open(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

double uniform_open_closed(Rng& rng, double lo, double hi) {
  // hi - (hi - lo) * u with u in [0,1) lands in (lo, hi]; rounding can still
  // produce lo when hi - lo is tiny, so reject that case.
  for (;;) {
    const double v = hi - (hi - lo) * uniform01(rng);
    if (v > lo) return v;
  }
}

double uniform_closed(Rng& rng, double lo, double hi) {
  return uniform_closed_open(rng, lo, hi);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % bound;
  }
}

}  // namespace brtm
