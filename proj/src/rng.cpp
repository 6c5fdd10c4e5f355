#include "dnh/rng.hpp"

#include <cmath>

#include "dnh/errors.hpp"

namespace dnh {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t RngState::next_u64() {
  ++counter;
  return mix64(seed + counter * kGolden);
}

double RngState::next_unit() {
  // Top 53 bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::normal(double mean, double var) {
  require(var >= 0.0 && std::isfinite(var) && std::isfinite(mean), ErrorKind::invalid_argument,
          "normal: var must be finite and >= 0");
  double z = 0.0;
  for (int i = 0; i < 12; ++i) z += next_unit();
  z -= 6.0;
  return mean + std::sqrt(var) * z;
}

RngState RngState::fork(uint64_t tag) const {
  return RngState(mix64(seed + mix64(tag) * kGolden));
}

double normal_sample(RngState& rng, double mean, double var) { return rng.normal(mean, var); }

}  // namespace dnh
