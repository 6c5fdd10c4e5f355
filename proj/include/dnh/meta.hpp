#pragma once

// The evolution operator: distribution-shift estimation, the composite
// meta-loss, add/prune triggers, and per-level frequency modulation. The
// controller mutates a Hierarchy in place once per step; everything it does
// is a deterministic function of its inputs and stored state.

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dnh/hierarchy.hpp"
#include "dnh/memory.hpp"
#include "dnh/numerics.hpp"

namespace dnh {

enum class FreqRule { first_order, second_order };
const char* freq_rule_name(FreqRule r);
FreqRule parse_freq_rule(const std::string& name);  // config error if unknown

struct MetaParams {
  double tau = 0.02;              // meta-loss threshold for adding a level
  double epsilon = 0.002;         // gradient-norm threshold for pruning
  double gamma = 0.1;             // surprise scale in the frequency drive
  double eta_f = 0.05;            // frequency step size; 0 disables the drive
  double beta_momentum = 0.9;     // momentum coefficient on the frequency drive
  double lambda = 0.1;            // per-change structural penalty
  double mu = 0.5;                // shift penalty
  double delta_threshold = 0.05;  // shift level that triggers an add
  double f_min = 0.25;
  double f_max = 8.0;
  int rollout_k = 20;      // lookahead steps per finite-difference rollout
  double fd_h = 0.25;      // frequency perturbation size
  long cooldown = 50;      // min steps between structural events
  double hebbian_alpha = 0.002;  // outer-product scale for added levels
  long fd_every = 25;      // rollout cadence in the training loop
  int shift_window = 200;  // W, per window
  double h_floor = 1e-6;   // curvature floor for the second-order rule
  double eta_phi = 1e-4;   // learning rate on the controller's own params
  FreqRule freq_rule = FreqRule::first_order;
};

// Throws a config error naming the first violated field.
void validate_meta_params(const MetaParams& p);

// Two adjacent sliding windows over the raw inputs. The estimate is
// KL(new || old) between diagonal Gaussians moment-matched to each window
// (population variance, floored at 1e-8), and 0 until both windows are full,
// i.e. for the first 2W observations.
class ShiftEstimator {
 public:
  ShiftEstimator() = default;
  ShiftEstimator(int dim, int window);

  double observe(const Vector& x);  // push x, return the current estimate
  double current() const { return last_; }
  long count() const { return count_; }
  int window() const { return w_; }

 private:
  void push(std::deque<Vector>& buf, Vector&& x, Vector& sum, Vector& sumsq);
  Vector pop(std::deque<Vector>& buf, Vector& sum, Vector& sumsq);

  int dim_ = 0;
  int w_ = 0;
  long count_ = 0;
  double last_ = 0.0;
  std::deque<Vector> new_, old_;
  Vector sum_new_, sumsq_new_, sum_old_, sumsq_old_;
};

// task_loss + lambda * struct_delta + mu * shift.
double meta_loss(double task_loss, int struct_delta, double shift, const MetaParams& p);

// Graph-edit count implied by a step's events: an add contributes one vertex
// and one edge (2); a prune contributes one vertex and one edge, plus another
// removed edge and a bridging edge when the level was interior (4). Frequency
// events touch no graph structure.
int structural_delta(const std::vector<StructuralEvent>& events);

struct FreqGradResult {
  double grad = 0.0;
  double hess = 0.0;
  bool one_sided = false;  // a frequency bound clamped the perturbation
};

// Scores a hierarchy clone whose frequencies have been perturbed; supplied by
// the training loop as a rollout over the next rollout_k samples. Terms that
// do not depend on the frequency cancel in the differences.
using RolloutEval = std::function<double(const Hierarchy&)>;

// Central finite difference of the rollout score in level's frequency.
// Perturbations are clamped to [f_min, f_max]; if a bound interferes, the
// difference falls back to one-sided and the result is flagged. with_hessian
// additionally evaluates the unperturbed point and fills a second-difference
// curvature estimate. upcoming is the number of samples available ahead;
// it must cover rollout_k.
FreqGradResult fd_frequency_gradient(const Hierarchy& h, int level, long upcoming,
                                     const RolloutEval& eval, const MetaParams& p,
                                     bool with_hessian);

// g = -fd_grad; m' = beta * m + (1 - beta) * g;
// f' = clamp(f + eta_f * g + m' + gamma * lss). Returns (f', m').
std::pair<double, double> modulate_frequency_first_order(double f, double lss, double fd_grad,
                                                         double mom, const MetaParams& p);

// f' = clamp(f - eta_f * fd_grad / max(|fd_hess|, h_floor)).
double modulate_frequency_second_order(double f, double fd_grad, double fd_hess,
                                       const MetaParams& p);

struct EvolveResult {
  double meta_loss_value = 0.0;
  double shift = 0.0;
  int struct_delta = 0;
  std::vector<StructuralEvent> events;
};

class MetaController {
 public:
  MetaController() = default;
  MetaController(const MetaParams& p, int dim)
      : params(p), shift_est(dim, p.shift_window) {}

  MetaParams params;
  GateParams gate;
  ShiftEstimator shift_est;
  std::map<int, double> freq_momentum;       // by module id
  std::map<int, FreqGradResult> freq_grads;  // latest rollout estimates, by id
  std::map<int, bool> saturated;             // by id; drives freq-change events
  long last_structural_step = -1;

  void set_freq_gradient(int module_id, const FreqGradResult& g) { freq_grads[module_id] = g; }
  bool cooldown_elapsed(long t) const {
    return last_structural_step < 0 || t - last_structural_step >= params.cooldown;
  }

  // One controller step, in fixed order: observe shift; provisional meta-loss
  // with zero structural cost; add trigger (meta-loss or shift above
  // threshold, capacity and cooldown permitting); otherwise prune trigger
  // (smallest sub-threshold gradient norm among levels >= 2, lowest level on
  // ties, at most one per step); frequency modulation on every level using
  // the latest injected gradient estimates; final meta-loss with the realized
  // structural cost. grads_per_level[i] is the task-loss gradient in level
  // i+1's parameters.
  EvolveResult evolve(Hierarchy& h, const Vector& x, double task_loss,
                      const std::vector<Matrix>& grads_per_level);

  // The non-adaptive path: observation and meta-loss only, arithmetic shared
  // with evolve so a fully disabled controller matches it exactly.
  EvolveResult evolve_static(const Vector& x, double task_loss);

  // Gradient step on the controller's own continuous parameters. Accepted
  // names: gamma (clamped at 0), gate_w, gate_b.
  void update_meta_params(const std::map<std::string, double>& fd_grads);
};

}  // namespace dnh
