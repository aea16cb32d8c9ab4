#include "mtxplain/rng.h"

#include <cmath>
#include <numbers>

namespace mtx {

double Rng::normal() {
  // Box-Muller; u1 is kept away from zero.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t Rng::below(uint64_t n) {
  // Rejection sampling removes modulo bias.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double hashed_uniform(uint64_t seed, uint64_t counter) {
  uint64_t h = mix64(mix64(seed) ^ counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace mtx
