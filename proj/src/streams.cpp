#include "dnh/streams.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "dnh/errors.hpp"

namespace dnh {

namespace {

constexpr uint64_t kTeacherTag = 1;
constexpr uint64_t kSampleTag = 2;
constexpr uint64_t kHeldoutTag = 3;

int uniform_index(RngState& rng, int n) {
  int i = static_cast<int>(rng.next_unit() * n);
  return i < n ? i : n - 1;
}

Vector normal_vector(RngState& rng, int d, double var) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal(0.0, var);
  return v;
}

// Random d x d direction with unit Frobenius norm.
Matrix unit_direction(RngState& rng, int d) {
  Matrix u(d, d);
  for (auto& e : u.data) e = rng.normal(0.0, 1.0);
  double n = frobenius_norm(u);
  require(n > 0.0, ErrorKind::numeric, "stream: degenerate direction draw");
  return scaled(u, 1.0 / n);
}

// Unit direction orthogonal (Frobenius) to u.
Matrix orthogonal_direction(RngState& rng, const Matrix& u, int d) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    Matrix w = unit_direction(rng, d);
    add_scaled(w, -frobenius_inner(w, u), u);
    double n = frobenius_norm(w);
    if (n > 1e-8) return scaled(w, 1.0 / n);
  }
  fail(ErrorKind::numeric, "stream: could not find an orthogonal direction");
}

// theta_s = base + radius * u_s with all u_s on the unit sphere and
// consecutive u separated by angle phi, so consecutive teachers are exactly
// 2 * radius * sin(phi / 2) apart in Frobenius norm.
std::vector<Matrix> build_drifting_teachers(const StreamSpec& spec, RngState rng) {
  double m = spec.shift_magnitude;
  double radius = std::max(0.3, m / 2.0);
  double phi = 2.0 * std::asin(m / (2.0 * radius));
  Matrix u = unit_direction(rng, spec.dim);
  std::vector<Matrix> teachers;
  teachers.reserve(spec.num_segments);
  for (int s = 0; s < spec.num_segments; ++s) {
    Matrix a = Matrix::identity(spec.dim);
    add_scaled(a, radius, u);
    teachers.push_back(std::move(a));
    if (s + 1 < spec.num_segments && m > 0.0) {
      Matrix w = orthogonal_direction(rng, u, spec.dim);
      Matrix next = scaled(u, std::cos(phi));
      add_scaled(next, std::sin(phi), w);
      u = std::move(next);
    }
  }
  return teachers;
}

// floor keeps the displaced-coordinate fraction at most shift_magnitude: each
// transposition moves 2 of the d coordinates.
std::vector<std::vector<int>> build_permutations(const StreamSpec& spec, RngState rng) {
  int d = spec.dim;
  int swaps = static_cast<int>(std::floor(spec.shift_magnitude * d / 2.0));
  std::vector<int> pi(d);
  for (int i = 0; i < d; ++i) pi[i] = i;
  std::vector<std::vector<int>> perms;
  perms.reserve(spec.num_segments);
  perms.push_back(pi);
  for (int s = 1; s < spec.num_segments; ++s) {
    for (int k = 0; k < swaps; ++k) {
      int i = uniform_index(rng, d);
      int j = uniform_index(rng, d - 1);
      if (j >= i) ++j;  // uniform over pairs with j != i
      std::swap(pi[i], pi[j]);
    }
    perms.push_back(pi);
  }
  return perms;
}

// Mean of class c in segment s: 1.5 * e_c rotated by s * m radians in the
// (0, 1) coordinate plane.
Vector class_mean(const StreamSpec& spec, int segment, int c) {
  Vector mu(spec.dim, 0.0);
  double angle = segment * spec.shift_magnitude;
  double r = 1.5;
  if (c == 0) {
    mu[0] = r * std::cos(angle);
    mu[1] = r * std::sin(angle);
  } else if (c == 1) {
    mu[0] = -r * std::sin(angle);
    mu[1] = r * std::cos(angle);
  } else {
    mu[c] = r;
  }
  return mu;
}

}  // namespace

const char* stream_kind_name(StreamKind k) {
  switch (k) {
    case StreamKind::drifting_linear: return "drifting_linear";
    case StreamKind::permuted_features: return "permuted_features";
    case StreamKind::rotating_gaussian: return "rotating_gaussian";
  }
  return "?";
}

StreamKind parse_stream_kind(const std::string& name) {
  if (name == "drifting_linear") return StreamKind::drifting_linear;
  if (name == "permuted_features") return StreamKind::permuted_features;
  if (name == "rotating_gaussian") return StreamKind::rotating_gaussian;
  fail(ErrorKind::config, "unknown stream kind '" + name + "'");
}

Stream::Stream(const StreamSpec& spec) : spec_(spec) {
  require(spec.dim >= 1, ErrorKind::config, "stream: dim must be >= 1");
  require(spec.kind != StreamKind::rotating_gaussian || spec.dim >= 2, ErrorKind::config,
          "stream: rotating_gaussian needs dim >= 2");
  require(spec.segment_len >= 1, ErrorKind::config, "stream: segment_len must be >= 1");
  require(spec.num_segments >= 1, ErrorKind::config, "stream: num_segments must be >= 1");
  require(std::isfinite(spec.shift_magnitude) && spec.shift_magnitude >= 0.0, ErrorKind::config,
          "stream: shift_magnitude must be finite and >= 0");
  require(std::isfinite(spec.noise_std) && spec.noise_std >= 0.0, ErrorKind::config,
          "stream: noise_std must be finite and >= 0");
  RngState base(spec.seed);
  sample_rng_ = base.fork(kSampleTag);
  if (spec.kind == StreamKind::drifting_linear) {
    teachers_ = build_drifting_teachers(spec, base.fork(kTeacherTag));
  } else if (spec.kind == StreamKind::permuted_features) {
    Matrix a = Matrix::identity(spec.dim);
    RngState trng = base.fork(kTeacherTag);
    add_scaled(a, 0.3, unit_direction(trng, spec.dim));
    teachers_.push_back(std::move(a));
    perms_ = build_permutations(spec, trng);
  }
}

int Stream::segment_of(long t) const {
  require(t >= 0 && t < total(), ErrorKind::range, "stream: step out of range");
  return static_cast<int>(t / spec_.segment_len);
}

Sample Stream::sample_at(long t, RngState& rng) const {
  int seg = segment_of(t);
  int d = spec_.dim;
  double nvar = spec_.noise_std * spec_.noise_std;
  Sample s;
  s.t = t;
  s.segment_id = seg;
  if (spec_.kind == StreamKind::rotating_gaussian) {
    // p(x) itself shifts: unit-variance clusters around rotating means. The
    // one-hot targets stay exact; noise_std only affects the teacher kinds.
    int c = uniform_index(rng, d);
    s.x = add(class_mean(spec_, seg, c), normal_vector(rng, d, 1.0));
    s.target = Vector(d, 0.0);
    s.target[c] = 1.0;
    return s;
  }
  s.x = normal_vector(rng, d, 1.0);
  if (spec_.kind == StreamKind::drifting_linear) {
    s.target = matvec(teachers_[seg], s.x);
  } else {
    Vector px(d);
    for (int i = 0; i < d; ++i) px[i] = s.x[perms_[seg][i]];
    s.target = matvec(teachers_[0], px);
  }
  axpy(s.target, 1.0, normal_vector(rng, d, nvar));
  return s;
}

Sample Stream::next() {
  require(!exhausted(), ErrorKind::end_of_stream, "stream: exhausted");
  Sample s = sample_at(t_, sample_rng_);
  ++t_;
  return s;
}

double Stream::true_shift_at(long t) const {
  require(t >= 0 && t < total(), ErrorKind::range, "true_shift_at: step out of range");
  if (t == 0 || t % spec_.segment_len != 0) return 0.0;
  int s = segment_of(t);
  if (spec_.kind == StreamKind::rotating_gaussian) return spec_.shift_magnitude;
  if (spec_.kind == StreamKind::drifting_linear)
    return frobenius_norm(sub(teacher(s), teacher(s - 1)));
  int displaced = 0;
  for (int i = 0; i < spec_.dim; ++i)
    if (perms_[s][i] != perms_[s - 1][i]) ++displaced;
  return static_cast<double>(displaced) / spec_.dim;
}

Matrix Stream::teacher(int segment) const {
  require(segment >= 0 && segment < spec_.num_segments, ErrorKind::range,
          "teacher: segment out of range");
  require(spec_.kind != StreamKind::rotating_gaussian, ErrorKind::invalid_state,
          "teacher: rotating_gaussian has no linear teacher");
  if (spec_.kind == StreamKind::drifting_linear) return teachers_[segment];
  // Effective map of y = A (P x): column c of the result is column pi^-1(c)
  // of A.
  const std::vector<int>& pi = perms_[segment];
  int d = spec_.dim;
  std::vector<int> inv(d);
  for (int k = 0; k < d; ++k) inv[pi[k]] = k;
  Matrix t(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) t(r, c) = teachers_[0](r, inv[c]);
  return t;
}

std::vector<Sample> Stream::heldout(int segment, int n, uint64_t salt) const {
  require(segment >= 0 && segment < spec_.num_segments, ErrorKind::range,
          "heldout: segment out of range");
  require(n >= 1, ErrorKind::invalid_argument, "heldout: n must be >= 1");
  RngState rng =
      RngState(spec_.seed).fork(kHeldoutTag).fork(static_cast<uint64_t>(segment)).fork(salt);
  std::vector<Sample> out;
  out.reserve(n);
  long t0 = static_cast<long>(segment) * spec_.segment_len;
  for (int i = 0; i < n; ++i) out.push_back(sample_at(t0, rng));
  return out;
}

std::vector<Sample> Stream::generate_all(const StreamSpec& spec) {
  Stream s(spec);
  std::vector<Sample> out;
  out.reserve(s.total());
  while (!s.exhausted()) out.push_back(s.next());
  return out;
}

void dump_stream_csv(std::ostream& os, const StreamSpec& spec) {
  Stream s(spec);
  os << "t,segment";
  for (int i = 0; i < spec.dim; ++i) os << ",x" << i;
  for (int i = 0; i < spec.dim; ++i) os << ",y" << i;
  os << '\n';
  char buf[40];
  while (!s.exhausted()) {
    Sample smp = s.next();
    os << smp.t << ',' << smp.segment_id;
    for (double v : smp.x) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    for (double v : smp.target) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace dnh
