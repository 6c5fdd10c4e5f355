#include "dnh/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "dnh/errors.hpp"

namespace dnh {

namespace {

constexpr uint64_t kTrainerRngTag = 4;  // stream forks use 1..3
constexpr int kHeldoutPerSegment = 500;
constexpr uint64_t kHeldoutSalt = 7919;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

// ---- OptimizerBank ----

void OptimizerBank::apply(MemoryModule& mod, const Matrix& grad) {
  require(grad.rows == mod.theta.rows && grad.cols == mod.theta.cols, ErrorKind::shape,
          "optimizer: gradient shape does not match parameters");
  if (cfg.kind == OptimizerKind::eadam) {
    auto it = adam.find(mod.id);
    if (it == adam.end()) {
      EAdamState st(grad.rows, grad.cols, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
      st.bias_correction = cfg.bias_correction;
      st.eta_beta = cfg.eta_beta;
      st.sigma2 = cfg.sigma2_init;
      it = adam.emplace(mod.id, std::move(st)).first;
    }
    add_scaled(mod.theta, 1.0, eadam_step(it->second, grad));
  } else {
    // The buffer lives in the module itself, so clones and prunes carry it
    // along for free. Decay, push the descent direction, apply.
    MomentumState st;
    st.m = scaled(mod.momentum, cfg.momentum_decay);
    st.eta = cfg.lr;
    mod.momentum = proximal_momentum_step(st, scaled(grad, -1.0)).m;
    add_scaled(mod.theta, 1.0, mod.momentum);
  }
  require(all_finite(mod.theta), ErrorKind::numeric, "optimizer: parameters diverged");
}

void OptimizerBank::drop(int id) {
  adam.erase(id);
  momentum.erase(id);
}

// ---- Trainer ----

Trainer::Trainer(const ExperimentConfig& cfg)
    : cfg_(cfg),
      stream_(cfg.stream),
      samples_(Stream::generate_all(cfg.stream)),
      steps_(effective_steps(cfg)),
      h_(cfg.stream.dim, cfg.l0, cfg.l_max, cfg.init_freqs, cfg.meta.f_min, cfg.meta.f_max),
      ctl_(cfg.meta, cfg.stream.dim),
      rng_(RngState(cfg.seed).fork(kTrainerRngTag)) {
  bank_.cfg = cfg.optimizer;
}

double Trainer::inner_step(Hierarchy& h, OptimizerBank& bank, const Sample& s,
                           std::vector<Matrix>* grads_out) {
  Vector y = h.forward(s.x);
  Vector e = sub(y, s.target);
  double task_loss = 0.5 * dot(e, e);

  // Pull the output error back through the stack. Level l's target is chosen
  // so that its local squared-error gradient equals e_l c_l^T, with
  // e_1 = y - target and e_{l+1} = theta(l)^T e_l. Surprise is recorded for
  // every level; parameters move only on due levels.
  int levels = h.size();
  std::vector<Matrix> grads;
  grads.reserve(levels);
  for (int l = 1; l <= levels; ++l) {
    MemoryModule& mod = h.module(l);
    Vector tgt = sub(matvec(mod.theta, mod.context), e);
    local_surprise(mod, mod.context, tgt);
    grads.push_back(level_loss_grad(mod, mod.context, tgt));
    if (l < levels) e = matvec_transposed(mod.theta, e);
  }
  for (int l : h.due_modules()) bank.apply(h.module(l), grads[l - 1]);
  if (grads_out) *grads_out = std::move(grads);
  return task_loss;
}

double Trainer::rollout_score(const Hierarchy& h, const OptimizerBank& bank, long start,
                              int k) const {
  require(k > 0, ErrorKind::invalid_argument, "rollout: k must be positive");
  require(start >= 0 && start + k <= static_cast<long>(samples_.size()), ErrorKind::range,
          "rollout: sample window out of range");
  Hierarchy rh = h;
  OptimizerBank rb = bank;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    rh.t = start + i;
    sum += inner_step(rh, rb, samples_[start + i], nullptr);
  }
  return sum / k;
}

double Trainer::adaptive_rollout_score(const MetaParams& params, long start, int k) const {
  require(k > 0, ErrorKind::invalid_argument, "rollout: k must be positive");
  require(start >= 0 && start + k <= static_cast<long>(samples_.size()), ErrorKind::range,
          "rollout: sample window out of range");
  Hierarchy rh = h_;
  OptimizerBank rb = bank_;
  MetaController rc = ctl_;
  rc.params = params;
  double sum = 0.0;
  std::vector<Matrix> grads;
  for (int i = 0; i < k; ++i) {
    const Sample& s = samples_[start + i];
    rh.t = start + i;
    double loss = inner_step(rh, rb, s, &grads);
    rc.evolve(rh, s.x, loss, grads);
    sum += loss;
  }
  return sum / k;
}

void Trainer::refresh_freq_gradients(long t) {
  long start = t + 1;
  long upcoming = static_cast<long>(samples_.size()) - start;
  int k = ctl_.params.rollout_k;
  if (upcoming < k) return;  // end of stream; keep the last estimates
  bool with_hess = ctl_.params.freq_rule == FreqRule::second_order;
  RolloutEval eval = [this, start, k](const Hierarchy& hh) {
    return rollout_score(hh, bank_, start, k);
  };
  for (const MemoryModule& mod : h_.modules)
    ctl_.set_freq_gradient(mod.id,
                           fd_frequency_gradient(h_, mod.level, upcoming, eval, ctl_.params,
                                                 with_hess));
}

void Trainer::refresh_beta_gradient(long t) {
  long start = t + 1;
  int k = ctl_.params.rollout_k;
  if (static_cast<long>(samples_.size()) - start < k) return;
  // One shared direction: nudge both betas of every state together and score.
  const double hb = 0.01;
  OptimizerBank plus = bank_, minus = bank_;
  for (auto& [id, st] : plus.adam) {
    st.beta1 = std::min(st.beta1 + hb, kBetaMax);
    st.beta2 = std::min(st.beta2 + hb, kBetaMax);
  }
  for (auto& [id, st] : minus.adam) {
    st.beta1 = std::max(st.beta1 - hb, 0.0);
    st.beta2 = std::max(st.beta2 - hb, 0.0);
  }
  double lp = rollout_score(h_, plus, start, k);
  double lm = rollout_score(h_, minus, start, k);
  beta_grad_ = (lp - lm) / (2.0 * hb);
}

void Trainer::refresh_phi(long t) {
  long start = t + 1;
  int k = ctl_.params.rollout_k;
  if (static_cast<long>(samples_.size()) - start < k) return;
  const double hg = 1e-3;
  MetaParams pp = ctl_.params;
  MetaParams pm = ctl_.params;
  pp.gamma += hg;
  pm.gamma = std::max(0.0, pm.gamma - hg);
  double span = pp.gamma - pm.gamma;
  std::map<std::string, double> grads;
  grads["gamma"] =
      span > 0.0 ? (adaptive_rollout_score(pp, start, k) - adaptive_rollout_score(pm, start, k)) / span
                 : 0.0;
  // The surprise gate never enters the training loop, so perturbing it
  // reruns an identical rollout: the difference is exactly zero.
  grads["gate_w"] = 0.0;
  grads["gate_b"] = 0.0;
  ctl_.update_meta_params(grads);
}

std::vector<StructuralEvent> Trainer::step(long t) {
  require(t >= 0 && t < static_cast<long>(samples_.size()), ErrorKind::range,
          "step index outside the generated stream");
  const Sample& s = samples_[t];
  h_.t = t;

  std::vector<Matrix> grads;
  last_.task_loss = inner_step(h_, bank_, s, &grads);

  bool adaptive = cfg_.mode == RunMode::dnh;
  bool beta_drift = cfg_.optimizer.kind == OptimizerKind::eadam &&
                    (cfg_.optimizer.eta_beta > 0.0 || cfg_.optimizer.sigma2_init > 0.0);
  if (adaptive && t % ctl_.params.fd_every == 0) {
    if (ctl_.params.eta_f > 0.0) refresh_freq_gradients(t);
    if (beta_drift) refresh_beta_gradient(t);
    if (cfg_.learn_phi) refresh_phi(t);
  }

  last_.evolve = adaptive ? ctl_.evolve(h_, s.x, last_.task_loss, grads)
                          : ctl_.evolve_static(s.x, last_.task_loss);

  bool pruned = false;
  for (const StructuralEvent& e : last_.evolve.events)
    if (e.kind == EventKind::prune) pruned = true;
  if (pruned) {
    std::set<int> live;
    for (const MemoryModule& mod : h_.modules) live.insert(mod.id);
    for (auto it = bank_.adam.begin(); it != bank_.adam.end();)
      it = live.count(it->first) ? std::next(it) : bank_.adam.erase(it);
    for (auto it = bank_.momentum.begin(); it != bank_.momentum.end();)
      it = live.count(it->first) ? std::next(it) : bank_.momentum.erase(it);
  }

  if (adaptive && beta_drift) {
    for (const MemoryModule& mod : h_.modules) {
      auto it = bank_.adam.find(mod.id);
      if (it != bank_.adam.end())
        eadam_evolve(it->second, mod.last_lss, beta_grad_, beta_grad_, ctl_.params.gamma, rng_);
    }
  }

  double gns = frobenius_inner(grads[0], grads[0]);
  for (const auto& [id, g] : ctl_.freq_grads) gns += g.grad * g.grad;
  last_.grad_norm_sq = gns;
  return last_.evolve.events;
}

void Trainer::evaluate_segment_end(int segment, MetricsLog& log) {
  for (int j = 0; j < log.task_matrix.n; ++j) {
    std::vector<Sample> held = stream_.heldout(j, kHeldoutPerSegment, kHeldoutSalt);
    Hierarchy frozen = h_;  // forward() writes contexts; keep the live run clean
    double sum = 0.0;
    for (const Sample& s : held) {
      Vector e = sub(frozen.forward(s.x), s.target);
      sum += 0.5 * dot(e, e);
    }
    log.task_matrix.value[segment][j] = sum / held.size();
  }
}

MetricsLog Trainer::run() {
  MetricsLog log;
  log.config_hash = config_hash(cfg_);
  log.replica_key = replica_key(cfg_);
  log.seed = cfg_.seed;
  log.l_max = cfg_.l_max;
  log.total_steps = steps_;
  log.config_echo = config_to_text(cfg_);
  int full_segments =
      static_cast<int>(std::min<long>(cfg_.stream.num_segments, steps_ / cfg_.stream.segment_len));
  log.task_matrix = TaskMatrix(full_segments);
  log.step_task_loss.reserve(steps_);
  log.step_grad_norm_sq.reserve(steps_);

  for (long t = 0; t < steps_; ++t) {
    std::vector<StructuralEvent> events;
    try {
      events = step(t);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::numeric)
        fail(ErrorKind::numeric, std::string(e.what()) + " (step " + std::to_string(t) + ")");
      throw;
    }
    log.step_task_loss.push_back(last_.task_loss);
    log.step_grad_norm_sq.push_back(last_.grad_norm_sq);
    log.events.insert(log.events.end(), events.begin(), events.end());

    if (t % cfg_.log_every == 0 || !events.empty()) {
      MetricsRecord r;
      r.t = t;
      r.task_loss = last_.task_loss;
      r.meta_loss = last_.evolve.meta_loss_value;
      r.levels = h_.size();
      for (const MemoryModule& mod : h_.modules) r.freqs.push_back(mod.freq);
      r.grad_norm_sq = last_.grad_norm_sq;
      r.shift_estimate = last_.evolve.shift;
      std::string joined;
      for (const StructuralEvent& e : events) {
        if (!joined.empty()) joined += ';';
        joined += format_event(e);
      }
      r.event = std::move(joined);
      log.records.push_back(std::move(r));
    }

    if ((t + 1) % cfg_.stream.segment_len == 0) {
      int segment = static_cast<int>((t + 1) / cfg_.stream.segment_len) - 1;
      if (segment < log.task_matrix.n) evaluate_segment_end(segment, log);
    }
  }
  return log;
}

MetricsLog run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Trainer trainer(cfg);
  return trainer.run();
}

// ---- comparators ----

namespace {

std::vector<double> fit_losses(const std::vector<Sample>& window, bool* used_ridge) {
  std::vector<Vector> xs, ys;
  xs.reserve(window.size());
  ys.reserve(window.size());
  for (const Sample& s : window) {
    xs.push_back(s.x);
    ys.push_back(s.target);
  }
  Matrix w = least_squares_fit(xs, ys, 1e-8, used_ridge);
  std::vector<double> out;
  out.reserve(window.size());
  for (const Sample& s : window) {
    Vector e = sub(matvec(w, s.x), s.target);
    out.push_back(0.5 * dot(e, e));
  }
  return out;
}

}  // namespace

std::vector<double> hindsight_comparator(const StreamSpec& spec, long limit, bool* used_ridge) {
  std::vector<Sample> all = Stream::generate_all(spec);
  if (limit > 0 && limit < static_cast<long>(all.size())) all.resize(limit);
  require(!all.empty(), ErrorKind::insufficient_data, "comparator: empty stream");
  return fit_losses(all, used_ridge);
}

std::vector<double> per_segment_comparator(const StreamSpec& spec, long limit) {
  std::vector<Sample> all = Stream::generate_all(spec);
  if (limit > 0 && limit < static_cast<long>(all.size())) all.resize(limit);
  require(!all.empty(), ErrorKind::insufficient_data, "comparator: empty stream");
  std::vector<double> out;
  out.reserve(all.size());
  for (size_t begin = 0; begin < all.size(); begin += spec.segment_len) {
    size_t end = std::min(all.size(), begin + spec.segment_len);
    std::vector<Sample> window(all.begin() + begin, all.begin() + end);
    std::vector<double> losses = fit_losses(window, nullptr);
    out.insert(out.end(), losses.begin(), losses.end());
  }
  return out;
}

// ---- compare driver ----

void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
  require(jobs >= 1, ErrorKind::invalid_argument, "jobs must be >= 1");
  if (tasks.empty()) return;
  jobs = std::min<int>(jobs, static_cast<int>(tasks.size()));
  if (jobs == 1) {
    for (auto& task : tasks) task();
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          tasks[i]();
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

CompareReport run_compare(const ExperimentConfig& cfg, int n_seeds, int jobs) {
  require(n_seeds >= 1, ErrorKind::invalid_argument, "compare: n_seeds must be >= 1");
  validate_config(cfg);

  CompareReport rep;
  rep.base = cfg;
  rep.n_seeds = n_seeds;
  rep.dnh_logs.resize(n_seeds);
  rep.static_logs.resize(n_seeds);
  std::vector<std::vector<double>> oracle(n_seeds), oracle_seg(n_seeds);

  std::vector<std::function<void()>> tasks;
  for (int i = 0; i < n_seeds; ++i) {
    ExperimentConfig c = cfg;
    c.seed = cfg.seed + static_cast<uint64_t>(i);
    c.stream.seed = cfg.stream.seed + static_cast<uint64_t>(i);
    rep.seeds.push_back(c.seed);
    ExperimentConfig cd = c;
    cd.mode = RunMode::dnh;
    ExperimentConfig cs = c;
    cs.mode = RunMode::static_baseline;
    long steps = effective_steps(c);
    tasks.push_back([&rep, cd, i] { rep.dnh_logs[i] = run_experiment(cd); });
    tasks.push_back([&rep, cs, i] { rep.static_logs[i] = run_experiment(cs); });
    tasks.push_back([&oracle, &oracle_seg, spec = c.stream, steps, i] {
      oracle[i] = hindsight_comparator(spec, steps);
      oracle_seg[i] = per_segment_comparator(spec, steps);
    });
  }
  run_parallel(tasks, jobs);

  auto summarize = [](const MetricsLog& log, const std::vector<double>& o) {
    ModeSummary s;
    std::vector<double> regret = cumulative_regret(log, o);
    s.final_regret = regret.empty() ? 0.0 : regret.back();
    if (log.task_matrix.n >= 2) {
      auto [aa, bwt] = aa_bwt(log.task_matrix, true);
      s.aa = aa;
      s.bwt = bwt;
    }
    s.structural_events = static_cast<long>(log.events.size());
    return s;
  };

  for (int i = 0; i < n_seeds; ++i) {
    rep.dnh.push_back(summarize(rep.dnh_logs[i], oracle[i]));
    rep.statics.push_back(summarize(rep.static_logs[i], oracle[i]));
    rep.mean_dnh_regret_seg += cumulative_regret(rep.dnh_logs[i], oracle_seg[i]).back();
    rep.mean_static_regret_seg += cumulative_regret(rep.static_logs[i], oracle_seg[i]).back();
    rep.mean_dnh_regret += rep.dnh.back().final_regret;
    rep.mean_static_regret += rep.statics.back().final_regret;
    rep.mean_dnh_aa += rep.dnh.back().aa;
    rep.mean_static_aa += rep.statics.back().aa;
    rep.mean_dnh_bwt += rep.dnh.back().bwt;
    rep.mean_static_bwt += rep.statics.back().bwt;
  }
  rep.mean_dnh_regret /= n_seeds;
  rep.mean_static_regret /= n_seeds;
  rep.mean_dnh_regret_seg /= n_seeds;
  rep.mean_static_regret_seg /= n_seeds;
  rep.mean_dnh_aa /= n_seeds;
  rep.mean_static_aa /= n_seeds;
  rep.mean_dnh_bwt /= n_seeds;
  rep.mean_static_bwt /= n_seeds;
  rep.regret_ratio = rep.mean_static_regret != 0.0
                         ? rep.mean_dnh_regret / rep.mean_static_regret
                         : std::numeric_limits<double>::quiet_NaN();
  rep.regret_within_bound = rep.mean_dnh_regret <= 0.8 * rep.mean_static_regret;
  return rep;
}

std::string compare_report_text(const CompareReport& rep) {
  std::ostringstream os;
  os << "== dnh vs static ==\n";
  os << "config_hash(base): " << hash_hex(config_hash(rep.base)) << "\n";
  os << "replica_key:       " << hash_hex(replica_key(rep.base)) << "\n";
  os << "seeds: " << rep.n_seeds << " (base " << rep.base.seed << ")\n\n";

  os << "per seed (final regret vs hindsight comparator; aa/bwt from the task matrix):\n";
  os << "  seed        dnh_regret     static_regret        dnh_aa     static_aa       dnh_bwt  "
        "  static_bwt  dnh_events\n";
  for (int i = 0; i < rep.n_seeds; ++i) {
    char line[256];
    std::snprintf(line, sizeof line,
                  "  %-6llu %13.6g %17.6g %13.6g %13.6g %13.6g %13.6g  %10ld\n",
                  static_cast<unsigned long long>(rep.seeds[i]), rep.dnh[i].final_regret,
                  rep.statics[i].final_regret, rep.dnh[i].aa, rep.statics[i].aa, rep.dnh[i].bwt,
                  rep.statics[i].bwt, rep.dnh[i].structural_events);
    os << line;
  }

  os << "\nmeans:\n";
  os << "  regret: dnh=" << fmt("%.6g", rep.mean_dnh_regret)
     << " static=" << fmt("%.6g", rep.mean_static_regret)
     << " ratio=" << fmt("%.6g", rep.regret_ratio)
     << " within-0.8-bound=" << (rep.regret_within_bound ? "yes" : "no") << "\n";
  os << "  regret vs per-segment comparator: dnh=" << fmt("%.6g", rep.mean_dnh_regret_seg)
     << " static=" << fmt("%.6g", rep.mean_static_regret_seg) << "\n";
  os << "  aa:     dnh=" << fmt("%.6g", rep.mean_dnh_aa)
     << " static=" << fmt("%.6g", rep.mean_static_aa) << "\n";
  os << "  bwt:    dnh=" << fmt("%.6g", rep.mean_dnh_bwt)
     << " static=" << fmt("%.6g", rep.mean_static_bwt) << "\n";

  // Mean level count over time, from the shared cadence records.
  std::vector<long> ts;
  for (const MetricsRecord& r : rep.dnh_logs.empty() ? std::vector<MetricsRecord>{}
                                                     : rep.dnh_logs[0].records)
    if (r.t % rep.base.log_every == 0) ts.push_back(r.t);
  if (!ts.empty()) {
    os << "\nmean level count (downsampled):\n";
    size_t stride = std::max<size_t>(1, ts.size() / 20);
    for (size_t k = 0; k < ts.size(); k += stride) {
      long t = ts[k];
      double sum = 0.0;
      int n = 0;
      for (const MetricsLog& log : rep.dnh_logs)
        for (const MetricsRecord& r : log.records)
          if (r.t == t && r.t % rep.base.log_every == 0) {
            sum += r.levels;
            ++n;
            break;
          }
      if (n > 0) os << "  t=" << t << "  L=" << fmt("%.3g", sum / n) << "\n";
    }
  }

  os << "\nstructural events:\n";
  for (int i = 0; i < rep.n_seeds; ++i) {
    os << "  seed " << rep.seeds[i] << ":";
    const auto& events = rep.dnh_logs[i].events;
    size_t shown = std::min<size_t>(events.size(), 20);
    for (size_t k = 0; k < shown; ++k) os << " t=" << events[k].step << ":" << format_event(events[k]);
    if (events.size() > shown) os << " (+" << events.size() - shown << " more)";
    if (events.empty()) os << " none";
    os << "\n";
  }
  return os.str();
}

}  // namespace dnh
