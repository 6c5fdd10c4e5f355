// Acceptance gate: eleven end-to-end checks, printed as one PASS/FAIL line
// each. Exit status is the number of failed criteria, so a green run exits 0.
// Every tolerance is pinned right next to the check it guards; the measured
// quantities are echoed on the line so a failure is diagnosable from the log
// alone. Checks that train on streams use fixed seeds and are deterministic,
// so the echoed numbers are stable across runs and machines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dnh/config.hpp"
#include "dnh/harness.hpp"
#include "dnh/hierarchy.hpp"
#include "dnh/memory.hpp"
#include "dnh/meta.hpp"
#include "dnh/metrics.hpp"
#include "dnh/numerics.hpp"
#include "dnh/optim.hpp"
#include "dnh/rng.hpp"
#include "dnh/streams.hpp"

namespace {

using namespace dnh;

std::string strf(const char* fmt, ...) {
  char buf[640];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---- 1: analytic gradients vs central finite differences ----

bool crit_gradients(std::string& msg) {
  RngState rng(2026);
  const int trials = 120;
  const double tol = 1e-5;

  double worst_level = 0.0;
  for (int i = 0; i < trials; ++i) {
    int d = 2 + static_cast<int>(rng.next_unit() * 7.0);
    d = std::min(d, 8);
    MemoryModule m(1, 1, d, 2.0);
    for (double& v : m.theta.data) v = rng.normal(0.0, 1.0);
    Vector x(d), tgt(d);
    for (double& v : x) v = rng.normal(0.0, 1.0);
    for (double& v : tgt) v = rng.normal(0.0, 1.0);

    Matrix g = level_loss_grad(m, x, tgt);
    auto loss = [&](const Matrix& th) {
      Vector y = matvec(th, x);
      Vector r = sub(y, tgt);
      return 0.5 * dot(r, r);
    };
    const double h = 1e-5;
    Matrix fd(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        Matrix tp = m.theta, tm = m.theta;
        tp(r, c) += h;
        tm(r, c) -= h;
        fd(r, c) = (loss(tp) - loss(tm)) / (2.0 * h);
      }
    double rel = frobenius_norm(sub(g, fd)) / std::max(frobenius_norm(fd), 1e-12);
    worst_level = std::max(worst_level, rel);
  }

  double worst_net = 0.0;
  for (int i = 0; i < trials; ++i) {
    int d = 2 + static_cast<int>(rng.next_unit() * 7.0);
    d = std::min(d, 8);
    MemoryModule m(1, 1, d, 2.0);
    for (double& v : m.theta.data) v = rng.normal(0.0, 0.7);
    MetaNet net(d);
    for (double& v : net.psi_w) v = rng.normal(0.0, 0.5);
    for (double& v : net.psi_b) v = rng.normal(0.0, 0.5);
    Vector k(d), val(d), ctx(d), prev(4 * d);
    for (double& v : k) v = rng.normal(0.0, 1.0);
    for (double& v : val) v = rng.normal(0.0, 1.0);
    for (double& v : ctx) v = rng.normal(0.0, 1.0);
    for (double& v : prev) v = rng.normal(0.0, 0.5);
    const double beta_reg = 0.1;

    Vector g = meta_net_objective_grad(m, net, k, val, ctx, beta_reg, prev);
    auto fn = [&](const Vector& flat) {
      MetaNet n2(d);
      for (int j = 0; j < 3 * d; ++j) n2.psi_w[j] = flat[j];
      for (int j = 0; j < d; ++j) n2.psi_b[j] = flat[3 * d + j];
      return meta_net_objective(m, n2, k, val, ctx, beta_reg, prev);
    };
    Vector fd = central_fd(fn, net.flat(), 1e-5);
    double rel = norm(sub(g, fd)) / std::max(norm(fd), 1e-12);
    worst_net = std::max(worst_net, rel);
  }

  msg = strf(
      "analytic gradients match central differences: level-loss worst rel err %.2e, "
      "modulation-net worst rel err %.2e over %d+%d random cases, dims 2..8 (tol %.0e)",
      worst_level, worst_net, trials, trials, tol);
  return worst_level < tol && worst_net < tol;
}

// ---- 2: proximal momentum step solves its own subproblem ----

bool crit_proximal(std::string& msg) {
  RngState rng(7);
  const int instances = 100;
  const int probes = 10000;
  // The buffer accumulates +eta*g (the bank negates when applying), so the
  // subproblem is J(m') = -<g, m'> + ||m' - m||^2 / (2 eta); the returned
  // buffer must not lose to any probe by more than float noise.
  const double slack = 1e-9;
  double worst_gap = -std::numeric_limits<double>::infinity();

  auto sqdiff = [](const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
      double dlt = a.data[i] - b.data[i];
      s += dlt * dlt;
    }
    return s;
  };

  for (int i = 0; i < instances; ++i) {
    int r = 1 + static_cast<int>(rng.next_unit() * 4.0);
    int c = 1 + static_cast<int>(rng.next_unit() * 4.0);
    MomentumState s(r, c, 0.05 + rng.next_unit());
    for (double& v : s.m.data) v = rng.normal(0.0, 1.0);
    Matrix g(r, c);
    for (double& v : g.data) v = rng.normal(0.0, 1.0);

    MomentumState out = proximal_momentum_step(s, g);
    double j_min = -frobenius_inner(g, out.m) + sqdiff(out.m, s.m) / (2.0 * s.eta);

    for (int p = 0; p < probes; ++p) {
      double radius = std::pow(10.0, rng.next_unit() * 4.0 - 3.0);  // 1e-3 .. 10
      Matrix probe = out.m;
      for (double& v : probe.data) v += rng.normal(0.0, radius);
      double j_p = -frobenius_inner(g, probe) + sqdiff(probe, s.m) / (2.0 * s.eta);
      worst_gap = std::max(worst_gap, j_min - j_p);
    }
  }

  msg = strf(
      "proximal momentum step minimizes its subproblem: worst objective gap vs %d probes "
      "x %d instances = %.2e (must be <= %.0e)",
      probes, instances, worst_gap, slack);
  return worst_gap <= slack;
}

// ---- 3: evolvable Adam with evolution off reproduces textbook Adam ----

struct RefAdam {
  std::vector<double> m, v;
  double b1, b2, lr, eps;
  long t = 0;

  RefAdam(size_t n, double b1_, double b2_, double lr_, double eps_)
      : m(n, 0.0), v(n, 0.0), b1(b1_), b2(b2_), lr(lr_), eps(eps_) {}

  void step(std::vector<double>& params, const std::vector<double>& g) {
    ++t;
    for (size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      double mhat = m[i] / (1.0 - std::pow(b1, static_cast<double>(t)));
      double vhat = v[i] / (1.0 - std::pow(b2, static_cast<double>(t)));
      params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

bool crit_adam_equivalence(std::string& msg) {
  const double tol = 1e-12;
  struct Case {
    int r, c;
    double lr, b1, b2;
  };
  const Case cases[] = {{2, 3, 0.01, 0.9, 0.999}, {4, 1, 0.002, 0.8, 0.99}, {3, 3, 0.05, 0.95, 0.9999}};

  RngState rng(31);
  double max_diff = 0.0;
  for (const Case& cs : cases) {
    EAdamState s(cs.r, cs.c, cs.lr, cs.b1, cs.b2, 1e-8);
    RefAdam ref(static_cast<size_t>(cs.r) * cs.c, cs.b1, cs.b2, cs.lr, 1e-8);
    std::vector<double> p_lib(ref.m.size(), 0.0), p_ref(ref.m.size(), 0.0);
    for (int t = 0; t < 500; ++t) {
      Matrix g(cs.r, cs.c);
      for (double& v : g.data) v = rng.normal(0.0, 1.0);
      Matrix upd = eadam_step(s, g);
      for (size_t i = 0; i < p_lib.size(); ++i) p_lib[i] += upd.data[i];
      ref.step(p_ref, g.data);
      for (size_t i = 0; i < p_lib.size(); ++i)
        max_diff = std::max(max_diff, std::abs(p_lib[i] - p_ref[i]));
    }
  }

  msg = strf(
      "frozen-beta Adam matches an independent reference: max param divergence %.2e over 3 "
      "shapes x 500 steps (tol %.0e)",
      max_diff, tol);
  return max_diff < tol;
}

// ---- 4: shift estimator calibration ----

bool crit_shift_estimator(std::string& msg) {
  const int w = 5000;
  ShiftEstimator est(1, w);
  RngState rng(12345);

  double stationary_max = 0.0;
  for (int i = 0; i < 12000; ++i) {
    est.observe({rng.normal(0.0, 1.0)});
    if (est.count() >= 2 * w) stationary_max = std::max(stationary_max, est.current());
  }
  for (int i = 0; i < w; ++i) est.observe({rng.normal(1.0, 1.0)});
  double at_boundary = est.current();

  // KL between N(1,1) and N(0,1) is 0.5; sampling error at window 5000 is
  // far inside the 0.05 band.
  bool ok = stationary_max < 0.01 && std::abs(at_boundary - 0.5) <= 0.05;
  msg = strf(
      "shift estimator calibrated: stationary peak %.4f (< 0.01), unit mean-shift estimate "
      "%.4f (target 0.5 +- 0.05) at window %d",
      stationary_max, at_boundary, w);
  return ok;
}

// ---- 5: adaptive run with adaptation disabled equals the static baseline ----

std::vector<std::string> filtered_csv_lines(const MetricsLog& log) {
  std::ostringstream os;
  write_metrics_csv(os, log);
  std::vector<std::string> lines;
  std::istringstream is(os.str());
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("# config_hash=", 0) == 0) continue;  // mode is echoed in the hash
    if (line.rfind("# replica_key=", 0) == 0) continue;
    lines.push_back(line);
  }
  return lines;
}

bool crit_degenerate_equivalence(std::string& msg) {
  std::vector<ExperimentConfig> bases;
  {
    ExperimentConfig c;
    c.stream = StreamSpec{StreamKind::drifting_linear, 3, 200, 3, 0.4, 0.02, 11};
    c.seed = 7;
    c.log_every = 25;
    bases.push_back(c);
  }
  {
    ExperimentConfig c;
    c.stream = StreamSpec{StreamKind::permuted_features, 4, 250, 2, 0.5, 0.0, 21};
    c.seed = 8;
    c.l0 = 1;
    c.init_freqs = {1.0};
    c.log_every = 30;
    c.meta.cooldown = 20;
    c.optimizer.kind = OptimizerKind::eadam;
    c.optimizer.lr = 0.005;
    bases.push_back(c);
  }
  {
    ExperimentConfig c;
    c.stream = StreamSpec{StreamKind::rotating_gaussian, 5, 150, 2, 0.4, 0.0, 31};
    c.seed = 9;
    c.l0 = 3;
    c.init_freqs = {4.0, 2.0, 1.0};
    c.log_every = 20;
    bases.push_back(c);
  }

  int matched = 0;
  long lines_total = 0;
  for (ExperimentConfig c : bases) {
    // Neutralize every adaptation channel; the remaining difference between
    // the two modes is bookkeeping only.
    c.meta.tau = 1e300;
    c.meta.delta_threshold = 1e300;
    c.meta.epsilon = 0.0;
    c.meta.eta_f = 0.0;
    c.meta.gamma = 0.0;
    c.learn_phi = false;
    c.optimizer.eta_beta = 0.0;
    c.optimizer.sigma2_init = 0.0;

    ExperimentConfig cd = c;
    cd.mode = RunMode::dnh;
    ExperimentConfig cs = c;
    cs.mode = RunMode::static_baseline;

    auto ld = filtered_csv_lines(run_experiment(cd));
    auto ls = filtered_csv_lines(run_experiment(cs));
    if (ld == ls && !ld.empty()) {
      ++matched;
      lines_total += static_cast<long>(ld.size());
    }
  }

  msg = strf(
      "adaptation-disabled runs reproduce the static baseline byte-for-byte: %d/3 configs "
      "identical across %ld csv lines (hash header lines excluded)",
      matched, lines_total);
  return matched == 3;
}

// ---- 6: regret on the drifting stream + placement of structural edits ----

ExperimentConfig drifting_base() {
  ExperimentConfig c;
  c.stream = StreamSpec{StreamKind::drifting_linear, 8, 2000, 10, 0.3, 0.0, 1};
  c.seed = 42;
  c.log_every = 50;
  c.mode = RunMode::dnh;
  return c;
}

long boundary_distance(long t, long segment_len, int num_segments) {
  long best = std::numeric_limits<long>::max();
  for (int k = 1; k < num_segments; ++k)
    best = std::min(best, std::labs(t - k * segment_len));
  return best;
}

bool crit_drift_regret(std::string& msg) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = drifting_base();
  CompareReport rep = run_compare(cfg, 3, 2);
  double elapsed = seconds_since(t0);
  const double budget = 180.0;  // three seeds, both modes, one desk core

  int seeds_with_boundary_add = 0, seeds_with_interior_prune = 0;
  long near_adds = 0, far_prunes = 0;
  const long band = 200;
  for (const MetricsLog& log : rep.dnh_logs) {
    bool any_near = false, any_far = false;
    for (const StructuralEvent& e : log.events) {
      long dist = boundary_distance(e.step, cfg.stream.segment_len, cfg.stream.num_segments);
      if (e.kind == EventKind::add && dist <= band) {
        any_near = true;
        ++near_adds;
      }
      if (e.kind == EventKind::prune && dist > band) {
        any_far = true;
        ++far_prunes;
      }
    }
    seeds_with_boundary_add += any_near ? 1 : 0;
    seeds_with_interior_prune += any_far ? 1 : 0;
  }

  bool ok = rep.regret_within_bound && seeds_with_boundary_add == 3 &&
            seeds_with_interior_prune == 3 && elapsed < budget;
  msg = strf(
      "drifting stream, 3 seeds: mean regret %.2f vs static %.2f (needs <= 0.8x), adds within "
      "%ld of a boundary in 3/3 seeds (%ld total), prunes beyond it in 3/3 (%ld total), %.1fs "
      "(< %.0fs)",
      rep.mean_dnh_regret, rep.mean_static_regret, band, near_adds, far_prunes, elapsed, budget);
  return ok;
}

// ---- 7: forgetting on permuted features ----

bool crit_backward_transfer(std::string& msg) {
  ExperimentConfig cfg = drifting_base();
  cfg.stream.kind = StreamKind::permuted_features;
  cfg.stream.num_segments = 5;
  cfg.stream.shift_magnitude = 0.5;
  cfg.stream.seed = 555;
  CompareReport rep = run_compare(cfg, 3, 2);

  bool ok = rep.mean_dnh_bwt >= rep.mean_static_bwt;
  msg = strf(
      "permuted features, 3 seeds: backward transfer %.3f (adaptive) vs %.3f (static); "
      "adaptive must forget no more",
      rep.mean_dnh_bwt, rep.mean_static_bwt);
  return ok;
}

// ---- 8: gradient-norm trend, stationary vs shifted ----

bool crit_grad_trend(std::string& msg) {
  auto cfg_for = [](double magnitude) {
    ExperimentConfig c = drifting_base();
    c.stream.num_segments = 30;  // 60k steps; the early transient fades
    c.stream.shift_magnitude = magnitude;
    c.learn_phi = true;
    // Structural edits are step changes, outside what a decay-rate fit can
    // see; hold the level count fixed and leave the smooth channels live.
    c.meta.tau = 1e300;
    c.meta.delta_threshold = 1e300;
    c.meta.epsilon = 0.0;
    return c;
  };

  MetricsLog stationary = run_experiment(cfg_for(0.0));
  MetricsLog shifted = run_experiment(cfg_for(0.3));
  auto [slope_stat, icpt_stat] = grad_norm_trend(stationary);
  auto [slope_shift, icpt_shift] = grad_norm_trend(shifted);
  (void)icpt_stat;
  (void)icpt_shift;
  double mean_stat = mean_of(stationary.step_grad_norm_sq);
  double mean_shift = mean_of(shifted.step_grad_norm_sq);

  // Stationary gradients vanish like 1/t (running-mean fit ~ -1); under
  // persistent shift the per-step gradient mass stays bounded away from
  // zero, so the fitted decay collapses and the mean stays high.
  bool ok = slope_stat <= -0.8 && slope_shift >= -0.35 && mean_shift > 10.0 * mean_stat;
  msg = strf(
      "grad-norm trend over 60k steps: stationary slope %.3f (<= -0.8), shifted slope %.3f "
      "(>= -0.35), mean sq norm %.2e vs %.2e (>10x separation)",
      slope_stat, slope_shift, mean_shift, mean_stat);
  return ok;
}

// ---- 9: replica frequency variance under optimizer noise ----

bool crit_replica_variance(std::string& msg) {
  auto noisy_base = [] {
    ExperimentConfig c = drifting_base();
    c.optimizer.kind = OptimizerKind::eadam;
    c.optimizer.sigma2_init = 0.01;
    c.optimizer.eta_beta = 0.1;
    return c;
  };

  auto run_replicas = [](ExperimentConfig c) {
    std::vector<MetricsLog> logs;
    for (uint64_t s = 42; s <= 44; ++s) {
      c.seed = s;  // same stream, different exploration noise
      logs.push_back(run_experiment(c));
    }
    return logs;
  };

  std::vector<MetricsLog> noisy = run_replicas(noisy_base());
  std::vector<const MetricsLog*> ptrs{&noisy[0], &noisy[1], &noisy[2]};
  auto series = freq_variance_across_replicas(ptrs, 1);

  std::vector<double> lx, ly;
  double max_var = 0.0;
  for (auto [t, var] : series) {
    max_var = std::max(max_var, var);
    if (t > 0 && var > 0.0) {
      lx.push_back(std::log(static_cast<double>(t)));
      ly.push_back(std::log(var));
    }
  }
  double growth = 0.0;
  bool enough = lx.size() >= 10;
  if (enough) growth = linear_fit(lx, ly).first;
  // Modulation at shipped strength is bang-bang: frequencies sit on the
  // clamp bounds, replicas occasionally disagree about which one. The
  // largest sample variance three values in [f_min, f_max] can have is
  // (f_max - f_min)^2 / 3, so dispersion is bounded by construction and the
  // fitted growth must stay at most linear.
  const MetaParams defaults;
  double span = defaults.f_max - defaults.f_min;
  bool bounded = max_var <= span * span / 3.0 + 1e-9;

  ExperimentConfig off = noisy_base();
  off.meta.eta_f = 0.0;
  off.meta.gamma = 0.0;
  off.meta.tau = 1e300;
  off.meta.delta_threshold = 1e300;
  off.meta.epsilon = 0.0;
  std::vector<MetricsLog> frozen = run_replicas(off);
  std::vector<const MetricsLog*> fptrs{&frozen[0], &frozen[1], &frozen[2]};
  bool noise_alive = frozen[0].step_task_loss != frozen[1].step_task_loss;
  bool all_zero = true;
  long zero_points = 0;
  for (int level = 1; level <= 2; ++level)
    for (auto [t, var] : freq_variance_across_replicas(fptrs, level)) {
      (void)t;
      all_zero = all_zero && var == 0.0;
      ++zero_points;
    }

  bool ok = enough && max_var > 1e-12 && bounded && growth <= 1.15 && noise_alive && all_zero;
  msg = strf(
      "replica frequency variance under optimizer noise: %zu divergent points, max %.3f (<= "
      "interval bound %.3f), log-log growth %.3f (<= 1.15); modulation off: exactly 0 at all "
      "%ld points while losses still differ",
      lx.size(), max_var, span * span / 3.0, growth, zero_points);
  return ok;
}

// ---- 10: bitwise determinism ----

bool crit_determinism(std::string& msg) {
  ExperimentConfig c;
  c.stream = StreamSpec{StreamKind::drifting_linear, 6, 500, 4, 0.3, 0.05, 9};
  c.seed = 7;
  c.learn_phi = true;
  c.optimizer.kind = OptimizerKind::eadam;
  c.optimizer.sigma2_init = 0.05;
  c.optimizer.eta_beta = 0.05;

  auto render = [](const MetricsLog& log) {
    std::ostringstream csv, sum;
    write_metrics_csv(csv, log);
    write_summary_text(sum, log);
    return std::pair<std::string, std::string>(csv.str(), sum.str());
  };
  auto [csv1, sum1] = render(run_experiment(c));
  auto [csv2, sum2] = render(run_experiment(c));

  bool ok = csv1 == csv2 && sum1 == sum2;
  msg = strf(
      "repeated runs are bitwise identical (noisy optimizer, live meta-learning): %zu csv "
      "bytes, %zu summary bytes",
      csv1.size(), sum1.size());
  return ok;
}

// ---- 11: structural safety fuzz ----

bool crit_structural_fuzz(std::string& msg) {
  RngState rng(99);
  const int configs = 200;
  const long steps_per_config = 5000;
  long steps_done = 0, structural_total = 0;
  std::string violation;

  auto pick = [&rng](std::initializer_list<double> xs) {
    auto it = xs.begin();
    std::advance(it, static_cast<long>(rng.next_unit() * static_cast<double>(xs.size())) %
                         static_cast<long>(xs.size()));
    return *it;
  };

  for (int f = 0; f < configs && violation.empty(); ++f) {
    ExperimentConfig c;
    c.stream.kind = static_cast<StreamKind>(static_cast<int>(rng.next_unit() * 3.0) % 3);
    c.stream.dim = 2 + static_cast<int>(rng.next_unit() * 5.0) % 5;
    c.stream.segment_len = 100 + static_cast<int>(rng.next_unit() * 900.0);
    c.stream.num_segments =
        static_cast<int>(steps_per_config / c.stream.segment_len) + 2;
    c.stream.shift_magnitude = rng.next_unit();
    c.stream.noise_std = 0.1 * rng.next_unit();
    c.stream.seed = 10000 + static_cast<uint64_t>(f);
    c.seed = 20000 + static_cast<uint64_t>(f);
    c.total_steps = steps_per_config;
    c.log_every = 1000;

    c.l0 = 1 + static_cast<int>(rng.next_unit() * 3.0) % 3;
    c.l_max = std::min(5, c.l0 + static_cast<int>(rng.next_unit() * 5.0));
    c.init_freqs.assign(static_cast<size_t>(c.l0), 0.0);
    for (double& fr : c.init_freqs) fr = 0.25 + rng.next_unit() * 7.5;

    c.meta.tau = std::pow(10.0, -4.0 + 2.5 * rng.next_unit());
    c.meta.delta_threshold = std::pow(10.0, -1.7 + 1.7 * rng.next_unit());
    c.meta.epsilon = std::pow(10.0, -5.0 + 3.5 * rng.next_unit());
    c.meta.gamma = 0.3 * rng.next_unit();
    c.meta.eta_f = rng.next_unit() < 0.3 ? 0.15 * rng.next_unit() : 0.0;
    c.meta.beta_momentum = pick({0.0, 0.5, 0.9});
    c.meta.cooldown = 1 + static_cast<int>(rng.next_unit() * 60.0);
    c.meta.rollout_k = 5 + static_cast<int>(rng.next_unit() * 8.0);
    c.meta.fd_every = 25;
    c.meta.shift_window = 20 + static_cast<int>(rng.next_unit() * 180.0);
    c.meta.hebbian_alpha = 0.05 * rng.next_unit();
    c.meta.freq_rule =
        rng.next_unit() < 0.5 ? FreqRule::first_order : FreqRule::second_order;

    c.optimizer.kind =
        rng.next_unit() < 0.5 ? OptimizerKind::proximal_momentum : OptimizerKind::eadam;
    c.optimizer.lr = std::pow(10.0, -4.0 + 1.7 * rng.next_unit());
    if (c.optimizer.kind == OptimizerKind::eadam && rng.next_unit() < 0.5) {
      c.optimizer.eta_beta = 0.1;
      c.optimizer.sigma2_init = 0.01;
    }
    c.learn_phi = f % 40 == 0;

    Trainer trainer(c);
    long last_structural = -1;
    for (long t = 0; t < steps_per_config; ++t) {
      std::vector<StructuralEvent> events;
      try {
        events = trainer.step(t);
      } catch (const Error& e) {
        violation = strf("config %d step %ld threw: %s", f, t, e.what());
        break;
      }
      ++steps_done;

      int adds = 0, prunes = 0;
      for (const StructuralEvent& e : events) {
        if (e.kind == EventKind::add) ++adds;
        if (e.kind == EventKind::prune) ++prunes;
        if (e.level < 1 || e.level > c.l_max) {
          violation = strf("config %d step %ld: event level %d outside [1,%d]", f, t, e.level,
                           c.l_max);
          break;
        }
      }
      structural_total += adds + prunes;
      int levels = trainer.hierarchy().size();
      if (levels < 1 || levels > c.l_max)
        violation = strf("config %d step %ld: %d levels outside [1,%d]", f, t, levels, c.l_max);
      else if (adds + prunes > 1)
        violation = strf("config %d step %ld: %d structural edits in one step", f, t,
                         adds + prunes);
      else if (adds + prunes == 1) {
        if (last_structural >= 0 && t - last_structural < c.meta.cooldown)
          violation = strf("config %d step %ld: edit %ld steps after previous (cooldown %d)", f,
                           t, t - last_structural, c.meta.cooldown);
        last_structural = t;
      }
      if (violation.empty()) {
        ValidationReport rep = trainer.hierarchy().validate();
        if (!rep.ok)
          violation = strf("config %d step %ld: %s", f, t, rep.violations.front().c_str());
      }
      if (!violation.empty()) break;
    }
  }

  bool ok = violation.empty() && steps_done >= 1000000;
  if (ok)
    msg = strf(
        "structural safety fuzz: %ld steps across %d random configs, %ld structural edits, "
        "invariants held (levels in range, one edit per step, cooldown gaps, wiring valid)",
        steps_done, configs, structural_total);
  else
    msg = strf("structural safety fuzz failed after %ld steps: %s", steps_done,
               violation.empty() ? "too few steps" : violation.c_str());
  return ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* tag;
    bool (*fn)(std::string&);
  };
  const Criterion criteria[] = {
      {"gradients", crit_gradients},
      {"proximal", crit_proximal},
      {"adam-equivalence", crit_adam_equivalence},
      {"shift-estimator", crit_shift_estimator},
      {"degenerate-equivalence", crit_degenerate_equivalence},
      {"drift-regret", crit_drift_regret},
      {"backward-transfer", crit_backward_transfer},
      {"grad-trend", crit_grad_trend},
      {"replica-variance", crit_replica_variance},
      {"determinism", crit_determinism},
      {"structural-fuzz", crit_structural_fuzz},
  };

  int failures = 0;
  int idx = 0;
  for (const Criterion& c : criteria) {
    ++idx;
    std::string msg;
    bool ok = false;
    try {
      ok = c.fn(msg);
    } catch (const std::exception& e) {
      msg = strf("%s raised: %s", c.tag, e.what());
    }
    std::printf("%s  [%2d] %s\n", ok ? "PASS" : "FAIL", idx, msg.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }

  if (failures == 0)
    std::printf("acceptance: all %d criteria passed\n", idx);
  else
    std::printf("acceptance: %d of %d criteria FAILED\n", failures, idx);
  return failures;
}
