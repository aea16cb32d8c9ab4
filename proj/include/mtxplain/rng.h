#ifndef MTXPLAIN_RNG_H_
#define MTXPLAIN_RNG_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace mtx {

// Seeded generator with platform-independent derived distributions.
// std::mt19937_64's raw output is fully specified by the standard; the
// <random> distributions are not, so uniform/normal/shuffle live here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer.
uint64_t mix64(uint64_t x);

// Counter-based uniform in [0, 1): a pure function of (seed, counter).
double hashed_uniform(uint64_t seed, uint64_t counter);

}  // namespace mtx

#endif  // MTXPLAIN_RNG_H_
