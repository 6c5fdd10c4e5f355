#pragma once

// Synthetic non-stationary data streams. A stream is num_segments segments of
// segment_len samples each; the data distribution is constant within a
// segment and changes at every boundary by a controlled amount
// (shift_magnitude). Everything is a pure function of the spec, so two
// streams built from equal specs emit identical samples.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dnh/numerics.hpp"
#include "dnh/rng.hpp"

namespace dnh {

enum class StreamKind {
  drifting_linear,    // y = A_s x + noise, teachers walk on a sphere around I
  permuted_features,  // y = A (P_s x) + noise, P_s drifts by transpositions
  rotating_gaussian,  // class clusters, means rotate in the (0,1) plane
};

const char* stream_kind_name(StreamKind k);
StreamKind parse_stream_kind(const std::string& name);  // config error if unknown

struct StreamSpec {
  StreamKind kind = StreamKind::drifting_linear;
  int dim = 8;
  long segment_len = 2000;
  int num_segments = 10;
  double shift_magnitude = 0.3;  // per-boundary change, units depend on kind
  double noise_std = 0.0;        // additive target noise, per coordinate
  uint64_t seed = 1;
};

struct Sample {
  long t = 0;
  int segment_id = 0;
  Vector x;
  Vector target;
};

class Stream {
 public:
  explicit Stream(const StreamSpec& spec);

  const StreamSpec& spec() const { return spec_; }
  long total() const { return spec_.segment_len * spec_.num_segments; }
  long position() const { return t_; }
  bool exhausted() const { return t_ >= total(); }
  int segment_of(long t) const;

  // Next sample in order; end_of_stream error once total() samples are out.
  Sample next();

  // Ground-truth distribution change at step t: 0 strictly inside segments;
  // at the first step of a segment, the realized boundary change. Units by
  // kind: Frobenius distance between teachers (drifting_linear), fraction of
  // displaced coordinates (permuted_features), rotation angle in radians
  // (rotating_gaussian).
  double true_shift_at(long t) const;

  // Effective linear teacher of a segment. Defined for the two linear kinds;
  // invalid-state error for rotating_gaussian.
  Matrix teacher(int segment) const;

  // n fresh evaluation samples from a segment's distribution, disjoint from
  // the training draw. Deterministic in (spec, segment, n, salt).
  std::vector<Sample> heldout(int segment, int n, uint64_t salt) const;

  // Entire stream as a vector, from a fresh generator.
  static std::vector<Sample> generate_all(const StreamSpec& spec);

 private:
  Sample sample_at(long t, RngState& rng) const;

  StreamSpec spec_;
  long t_ = 0;
  RngState sample_rng_;
  std::vector<Matrix> teachers_;            // linear kinds: one per segment
  std::vector<std::vector<int>> perms_;     // permuted_features: pi per segment
};

// Writes "t,segment,x0..,y0.." rows for the whole stream, full precision.
void dump_stream_csv(std::ostream& os, const StreamSpec& spec);

}  // namespace dnh
