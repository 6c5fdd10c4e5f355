#pragma once

// Deterministic counter-based random generator.
//
// Draw i of a stream is mix(seed') ^ ... a pure function of (seed, i), where
// mix is the SplitMix64 finalizer applied to seed + (i+1) * golden-ratio
// increment. State is just (seed, counter): streams can be serialized,
// restored, and forked cheaply, and two runs with the same seed produce the
// same byte-for-byte sequence on any platform (integer ops only).
//
// Normal variates use the sum-of-12-uniforms method: z = sum of 12 U[0,1)
// draws minus 6. Mean and variance are exactly 0 and 1 and no libm call is
// involved, keeping cross-platform determinism; the price is truncated tails
// (|z| <= 6). That trade is fine at this scale.

#include <cstdint>

namespace dnh {

struct RngState {
  uint64_t seed = 0;
  uint64_t counter = 0;

  RngState() = default;
  explicit RngState(uint64_t s) : seed(s) {}
  RngState(uint64_t s, uint64_t c) : seed(s), counter(c) {}

  uint64_t next_u64();
  double next_unit();  // [0, 1), 53-bit resolution
  double normal(double mean, double var);

  // Independent stream derived from (seed, tag); does not advance *this.
  RngState fork(uint64_t tag) const;
};

// Free-function form of RngState::normal. var = 0 returns mean exactly (the
// counter still advances); var < 0 is an invalid-argument error.
double normal_sample(RngState& rng, double mean, double var);

}  // namespace dnh
