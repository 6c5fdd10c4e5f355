#include "dnh/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dnh/errors.hpp"

namespace dnh {

const char* freq_rule_name(FreqRule r) {
  switch (r) {
    case FreqRule::first_order: return "first_order";
    case FreqRule::second_order: return "second_order";
  }
  return "?";
}

FreqRule parse_freq_rule(const std::string& name) {
  if (name == "first_order") return FreqRule::first_order;
  if (name == "second_order") return FreqRule::second_order;
  fail(ErrorKind::config, "unknown freq_rule '" + name + "'");
}

void validate_meta_params(const MetaParams& p) {
  auto check = [](bool ok, const char* what) { require(ok, ErrorKind::config, what); };
  check(!std::isnan(p.tau), "meta: tau must not be NaN");
  check(p.epsilon >= 0.0, "meta: epsilon must be >= 0");
  check(std::isfinite(p.gamma) && p.gamma >= 0.0, "meta: gamma must be >= 0");
  check(std::isfinite(p.eta_f) && p.eta_f >= 0.0, "meta: eta_f must be >= 0");
  check(p.beta_momentum >= 0.0 && p.beta_momentum < 1.0, "meta: beta_momentum must be in [0,1)");
  check(std::isfinite(p.lambda) && p.lambda >= 0.0, "meta: lambda must be >= 0");
  check(std::isfinite(p.mu) && p.mu >= 0.0, "meta: mu must be >= 0");
  check(p.delta_threshold > 0.0, "meta: delta_threshold must be > 0");
  check(std::isfinite(p.f_min) && p.f_min > 0.0, "meta: f_min must be > 0");
  check(std::isfinite(p.f_max) && p.f_max >= p.f_min, "meta: need f_min <= f_max");
  check(p.rollout_k >= 1, "meta: rollout_k must be >= 1");
  check(std::isfinite(p.fd_h) && p.fd_h > 0.0, "meta: fd_h must be > 0");
  check(p.cooldown >= 0, "meta: cooldown must be >= 0");
  check(std::isfinite(p.hebbian_alpha), "meta: hebbian_alpha must be finite");
  check(p.fd_every >= 1, "meta: fd_every must be >= 1");
  check(p.shift_window >= 2, "meta: shift_window must be >= 2");
  check(std::isfinite(p.h_floor) && p.h_floor > 0.0, "meta: h_floor must be > 0");
  check(std::isfinite(p.eta_phi) && p.eta_phi >= 0.0, "meta: eta_phi must be >= 0");
}

ShiftEstimator::ShiftEstimator(int dim, int window) : dim_(dim), w_(window) {
  require(dim >= 1, ErrorKind::invalid_argument, "shift estimator: dim must be >= 1");
  require(window >= 2, ErrorKind::invalid_argument, "shift estimator: window must be >= 2");
  sum_new_.assign(dim, 0.0);
  sumsq_new_.assign(dim, 0.0);
  sum_old_.assign(dim, 0.0);
  sumsq_old_.assign(dim, 0.0);
}

void ShiftEstimator::push(std::deque<Vector>& buf, Vector&& x, Vector& sum, Vector& sumsq) {
  for (int i = 0; i < dim_; ++i) {
    sum[i] += x[i];
    sumsq[i] += x[i] * x[i];
  }
  buf.push_back(std::move(x));
}

Vector ShiftEstimator::pop(std::deque<Vector>& buf, Vector& sum, Vector& sumsq) {
  Vector x = std::move(buf.front());
  buf.pop_front();
  for (int i = 0; i < dim_; ++i) {
    sum[i] -= x[i];
    sumsq[i] -= x[i] * x[i];
  }
  return x;
}

double ShiftEstimator::observe(const Vector& x) {
  require(w_ >= 2, ErrorKind::invalid_state, "shift estimator: not initialized");
  require(static_cast<int>(x.size()) == dim_, ErrorKind::shape,
          "shift estimator: input dim mismatch");
  require(all_finite(x), ErrorKind::numeric, "shift estimator: non-finite input");
  ++count_;
  push(new_, Vector(x), sum_new_, sumsq_new_);
  if (static_cast<int>(new_.size()) > w_) {
    Vector migrated = pop(new_, sum_new_, sumsq_new_);
    push(old_, std::move(migrated), sum_old_, sumsq_old_);
    if (static_cast<int>(old_.size()) > w_) pop(old_, sum_old_, sumsq_old_);
  }
  if (static_cast<int>(new_.size()) < w_ || static_cast<int>(old_.size()) < w_) {
    last_ = 0.0;
    return last_;
  }
  constexpr double kVarFloor = 1e-8;
  Vector mu_new(dim_), var_new(dim_), mu_old(dim_), var_old(dim_);
  for (int i = 0; i < dim_; ++i) {
    mu_new[i] = sum_new_[i] / w_;
    var_new[i] = std::max(sumsq_new_[i] / w_ - mu_new[i] * mu_new[i], kVarFloor);
    mu_old[i] = sum_old_[i] / w_;
    var_old[i] = std::max(sumsq_old_[i] / w_ - mu_old[i] * mu_old[i], kVarFloor);
  }
  last_ = gaussian_kl(mu_new, var_new, mu_old, var_old);
  return last_;
}

double meta_loss(double task_loss, int struct_delta, double shift, const MetaParams& p) {
  require(std::isfinite(task_loss), ErrorKind::numeric, "meta_loss: non-finite task loss");
  require(struct_delta >= 0, ErrorKind::invalid_argument, "meta_loss: struct_delta must be >= 0");
  require(shift >= 0.0, ErrorKind::invalid_argument, "meta_loss: shift must be >= 0");
  return task_loss + p.lambda * struct_delta + p.mu * shift;
}

int structural_delta(const std::vector<StructuralEvent>& events) {
  int total = 0;
  for (const auto& e : events) {
    if (e.kind == EventKind::add) total += 2;
    else if (e.kind == EventKind::prune) total += e.interior ? 4 : 2;
  }
  return total;
}

FreqGradResult fd_frequency_gradient(const Hierarchy& h, int level, long upcoming,
                                     const RolloutEval& eval, const MetaParams& p,
                                     bool with_hessian) {
  require(level >= 1 && level <= h.size(), ErrorKind::range,
          "fd_frequency_gradient: no such level");
  require(upcoming > 0, ErrorKind::invalid_argument,
          "fd_frequency_gradient: empty rollout horizon");
  require(upcoming >= p.rollout_k, ErrorKind::invalid_argument,
          "fd_frequency_gradient: rollout_k exceeds remaining samples");
  require(static_cast<bool>(eval), ErrorKind::invalid_argument,
          "fd_frequency_gradient: missing evaluator");
  double f = h.module(level).freq;
  double fp = std::clamp(f + p.fd_h, p.f_min, p.f_max);
  double fm = std::clamp(f - p.fd_h, p.f_min, p.f_max);
  require(fp > fm, ErrorKind::invalid_argument,
          "fd_frequency_gradient: frequency range degenerate against fd_h");
  bool hi_clamped = fp != f + p.fd_h;
  bool lo_clamped = fm != f - p.fd_h;

  auto eval_at = [&](double freq) {
    Hierarchy clone = h;
    clone.module(level).freq = freq;
    double v = eval(clone);
    require(std::isfinite(v), ErrorKind::numeric, "fd_frequency_gradient: non-finite rollout");
    return v;
  };

  FreqGradResult r;
  r.one_sided = hi_clamped || lo_clamped;
  double lp = eval_at(fp);
  double lm = eval_at(fm);
  double l0 = 0.0;
  bool have_l0 = false;
  if (with_hessian || (hi_clamped != lo_clamped)) {
    l0 = eval_at(f);
    have_l0 = true;
  }
  if (hi_clamped && !lo_clamped) {
    r.grad = (l0 - lm) / (f - fm);
  } else if (lo_clamped && !hi_clamped) {
    r.grad = (lp - l0) / (fp - f);
  } else {
    r.grad = (lp - lm) / (fp - fm);
  }
  if (with_hessian) {
    double h1 = f - fm, h2 = fp - f;
    if (h1 > 0.0 && h2 > 0.0) {
      r.hess = 2.0 * (h1 * lp - (h1 + h2) * l0 + h2 * lm) / (h1 * h2 * (h1 + h2));
    } else {
      r.hess = 0.0;  // both probes on one side; curvature not identifiable
      r.one_sided = true;
    }
  }
  (void)have_l0;
  return r;
}

std::pair<double, double> modulate_frequency_first_order(double f, double lss, double fd_grad,
                                                         double mom, const MetaParams& p) {
  require(lss >= 0.0, ErrorKind::invalid_argument, "frequency rule: lss must be >= 0");
  double g = -fd_grad;
  double mom_next = p.beta_momentum * mom + (1.0 - p.beta_momentum) * g;
  double f_next = std::clamp(f + p.eta_f * g + mom_next + p.gamma * lss, p.f_min, p.f_max);
  return {f_next, mom_next};
}

double modulate_frequency_second_order(double f, double fd_grad, double fd_hess,
                                       const MetaParams& p) {
  double damped = std::max(std::abs(fd_hess), p.h_floor);
  return std::clamp(f - p.eta_f * fd_grad / damped, p.f_min, p.f_max);
}

EvolveResult MetaController::evolve(Hierarchy& h, const Vector& x, double task_loss,
                                    const std::vector<Matrix>& grads_per_level) {
  require(grads_per_level.size() == h.modules.size(), ErrorKind::invalid_argument,
          "evolve: need one gradient per level");
  EvolveResult r;
  r.shift = shift_est.observe(x);
  double provisional = meta_loss(task_loss, 0, r.shift, params);
  bool window_open = cooldown_elapsed(h.t);

  if ((provisional > params.tau || r.shift > params.delta_threshold) && h.size() < h.l_max &&
      window_open) {
    r.events.push_back(h.add_level(params.hebbian_alpha));
    last_structural_step = h.t;
  } else if (window_open && h.size() >= 2) {
    int pick = 0;
    double pick_norm = std::numeric_limits<double>::infinity();
    for (int l = 2; l <= h.size(); ++l) {
      double n = frobenius_norm(grads_per_level[l - 1]);
      if (n < params.epsilon && n < pick_norm) {  // strict < keeps the lowest level on ties
        pick = l;
        pick_norm = n;
      }
    }
    if (pick != 0) {
      int removed_id = h.module(pick).id;
      r.events.push_back(h.prune_level(pick, pick_norm));
      freq_momentum.erase(removed_id);
      freq_grads.erase(removed_id);
      saturated.erase(removed_id);
      last_structural_step = h.t;
    }
  }

  for (auto& m : h.modules) {
    auto sat_it = saturated.find(m.id);
    if (sat_it == saturated.end()) {
      bool at_bound = m.freq == params.f_min || m.freq == params.f_max;
      sat_it = saturated.emplace(m.id, at_bound).first;
    }
    FreqGradResult g;
    if (auto it = freq_grads.find(m.id); it != freq_grads.end()) g = it->second;
    if (params.freq_rule == FreqRule::first_order) {
      auto [f_next, mom_next] =
          modulate_frequency_first_order(m.freq, m.last_lss, g.grad, freq_momentum[m.id], params);
      m.freq = f_next;
      freq_momentum[m.id] = mom_next;
    } else {
      m.freq = modulate_frequency_second_order(m.freq, g.grad, g.hess, params);
    }
    bool now_sat = m.freq == params.f_min || m.freq == params.f_max;
    if (now_sat && !sat_it->second) {
      StructuralEvent ev{h.t, EventKind::freq_change, m.level, m.freq, false};
      h.ledger.push_back(ev);
      r.events.push_back(ev);
    }
    sat_it->second = now_sat;
  }

  r.struct_delta = structural_delta(r.events);
  r.meta_loss_value = meta_loss(task_loss, r.struct_delta, r.shift, params);
  return r;
}

EvolveResult MetaController::evolve_static(const Vector& x, double task_loss) {
  EvolveResult r;
  r.shift = shift_est.observe(x);
  r.struct_delta = 0;
  r.meta_loss_value = meta_loss(task_loss, 0, r.shift, params);
  return r;
}

void MetaController::update_meta_params(const std::map<std::string, double>& fd_grads) {
  for (const auto& [name, g] : fd_grads) {
    require(std::isfinite(g), ErrorKind::numeric, "update_meta_params: non-finite gradient");
    if (name == "gamma") {
      params.gamma = std::max(0.0, params.gamma - params.eta_phi * g);
    } else if (name == "gate_w") {
      gate.w -= params.eta_phi * g;
    } else if (name == "gate_b") {
      gate.b -= params.eta_phi * g;
    } else {
      fail(ErrorKind::invalid_argument, "update_meta_params: unknown parameter '" + name + "'");
    }
  }
}

}  // namespace dnh
