#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "dnh/streams.hpp"

using namespace dnh;

namespace {

StreamSpec small_spec(StreamKind kind, double m) {
  StreamSpec s;
  s.kind = kind;
  s.dim = 4;
  s.segment_len = 50;
  s.num_segments = 4;
  s.shift_magnitude = m;
  s.noise_std = 0.0;
  s.seed = 99;
  return s;
}

}  // namespace

TEST_CASE("streams are pure functions of the spec") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  Stream a(spec), b(spec);
  for (long t = 0; t < a.total(); ++t) {
    Sample sa = a.next();
    Sample sb = b.next();
    CHECK(sa.t == t);
    CHECK(sa.x == sb.x);
    CHECK(sa.target == sb.target);
    CHECK(sa.segment_id == sb.segment_id);
  }
  CHECK(a.exhausted());
  CHECK_THROWS_AS(a.next(), Error);

  auto all = Stream::generate_all(spec);
  CHECK(long(all.size()) == a.total());
}

TEST_CASE("segment bookkeeping") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  Stream s(spec);
  CHECK(s.total() == 200);
  CHECK(s.segment_of(0) == 0);
  CHECK(s.segment_of(49) == 0);
  CHECK(s.segment_of(50) == 1);
  CHECK(s.segment_of(199) == 3);
  CHECK_THROWS_AS(s.segment_of(200), Error);
  CHECK_THROWS_AS(s.segment_of(-1), Error);
}

TEST_CASE("drifting_linear matches its per-segment teacher exactly") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  Stream ref(spec);
  for (const Sample& s : Stream::generate_all(spec)) {
    Matrix a = ref.teacher(s.segment_id);
    Vector want = matvec(a, s.x);
    for (int i = 0; i < spec.dim; ++i)
      CHECK(s.target[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("drifting_linear boundary moves have exactly the configured size") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  Stream s(spec);
  for (int seg = 1; seg < spec.num_segments; ++seg) {
    Matrix d = sub(s.teacher(seg), s.teacher(seg - 1));
    CHECK(frobenius_norm(d) == doctest::Approx(0.3).epsilon(1e-9));
  }
  // true_shift_at: zero inside segments, the realized move at boundaries
  CHECK(s.true_shift_at(0) == 0.0);
  CHECK(s.true_shift_at(25) == 0.0);
  CHECK(s.true_shift_at(50) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(s.true_shift_at(51) == 0.0);
  CHECK(s.true_shift_at(150) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("stationary drift keeps one fixed nontrivial teacher") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.0);
  Stream s(spec);
  Matrix first = s.teacher(0);
  CHECK(frobenius_norm(sub(first, Matrix::identity(spec.dim))) > 1e-6);
  for (int seg = 1; seg < spec.num_segments; ++seg) {
    CHECK(s.teacher(seg) == first);
    CHECK(s.true_shift_at(seg * spec.segment_len) == 0.0);
  }
}

TEST_CASE("target noise has the configured scale") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  spec.noise_std = 0.1;
  spec.segment_len = 4000;
  spec.num_segments = 1;
  Stream s(spec);
  Matrix a = s.teacher(0);
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  for (const Sample& smp : Stream::generate_all(spec)) {
    Vector r = sub(smp.target, matvec(a, smp.x));
    for (double v : r) {
      sum += v;
      sumsq += v * v;
      ++n;
    }
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("permuted_features displaces a bounded fraction per boundary") {
  StreamSpec spec = small_spec(StreamKind::permuted_features, 0.5);
  Stream s(spec);
  for (int seg = 1; seg < spec.num_segments; ++seg) {
    double moved = s.true_shift_at(seg * spec.segment_len);
    CHECK(moved <= 0.5 + 1e-12);
    CHECK(moved > 0.0);  // 0.5 * 4 / 2 = 1 transposition per boundary
  }
  // samples follow the composed teacher
  for (const Sample& smp : Stream::generate_all(spec)) {
    Matrix a = s.teacher(smp.segment_id);
    Vector want = matvec(a, smp.x);
    for (int i = 0; i < spec.dim; ++i)
      CHECK(smp.target[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("permuted_features with zero magnitude never permutes") {
  StreamSpec spec = small_spec(StreamKind::permuted_features, 0.0);
  Stream s(spec);
  for (int seg = 1; seg < spec.num_segments; ++seg) {
    CHECK(s.teacher(seg) == s.teacher(0));
    CHECK(s.true_shift_at(seg * spec.segment_len) == 0.0);
  }
}

TEST_CASE("rotating_gaussian emits one-hot targets and has no linear teacher") {
  StreamSpec spec = small_spec(StreamKind::rotating_gaussian, 0.4);
  Stream s(spec);
  for (const Sample& smp : Stream::generate_all(spec)) {
    double sum = 0.0;
    int ones = 0;
    for (double v : smp.target) {
      sum += v;
      if (v == 1.0) ++ones;
      CHECK((v == 0.0 || v == 1.0));
    }
    CHECK(sum == 1.0);
    CHECK(ones == 1);
  }
  CHECK_THROWS_AS(s.teacher(0), Error);
  CHECK(s.true_shift_at(spec.segment_len) == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("heldout draws are deterministic and disjoint from training") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  Stream s(spec);
  auto a = s.heldout(1, 20, 7);
  auto b = s.heldout(1, 20, 7);
  REQUIRE(a.size() == 20);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].target == b[i].target);
  }
  auto c = s.heldout(1, 20, 8);  // different salt, different draw
  CHECK(a[0].x != c[0].x);

  // same distribution: teacher residuals vanish without noise
  Matrix t1 = s.teacher(1);
  for (const Sample& smp : a) {
    Vector want = matvec(t1, smp.x);
    for (int i = 0; i < spec.dim; ++i)
      CHECK(smp.target[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }

  // no overlap with the training stream of that segment
  std::set<double> train_firsts;
  for (const Sample& smp : Stream::generate_all(spec))
    if (smp.segment_id == 1) train_firsts.insert(smp.x[0]);
  for (const Sample& smp : a) CHECK(train_firsts.count(smp.x[0]) == 0);

  CHECK_THROWS_AS(s.heldout(99, 5, 0), Error);
  CHECK_THROWS_AS(s.heldout(0, 0, 0), Error);
}

TEST_CASE("csv dump covers the full stream") {
  StreamSpec spec = small_spec(StreamKind::drifting_linear, 0.3);
  std::ostringstream os;
  dump_stream_csv(os, spec);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line.rfind("t,segment,", 0) == 0);
  long rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 200);

  std::ostringstream os2;
  dump_stream_csv(os2, spec);
  CHECK(os.str() == os2.str());
}

TEST_CASE("kind names round-trip and reject junk") {
  CHECK(parse_stream_kind("drifting_linear") == StreamKind::drifting_linear);
  CHECK(parse_stream_kind("permuted_features") == StreamKind::permuted_features);
  CHECK(parse_stream_kind("rotating_gaussian") == StreamKind::rotating_gaussian);
  CHECK(stream_kind_name(StreamKind::rotating_gaussian) == std::string("rotating_gaussian"));
  CHECK_THROWS_AS(parse_stream_kind("windy"), Error);
}
