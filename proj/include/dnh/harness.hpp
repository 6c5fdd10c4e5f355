#pragma once

// The experiment loop: a Trainer owns the hierarchy, the controller, and the
// per-module optimizer states, and advances one sample at a time. Rollouts
// for finite-difference estimates clone the whole trainer state, so the live
// run is never touched by lookahead.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dnh/config.hpp"
#include "dnh/hierarchy.hpp"
#include "dnh/meta.hpp"
#include "dnh/metrics.hpp"
#include "dnh/optim.hpp"
#include "dnh/rng.hpp"
#include "dnh/streams.hpp"

namespace dnh {

// Optimizer states keyed by module id: structural edits leave surviving
// levels' moments untouched, and a pruned id is simply erased.
struct OptimizerBank {
  OptimizerConfig cfg;
  std::map<int, EAdamState> adam;
  std::map<int, MomentumState> momentum;

  // One descent step on module m for the given loss gradient.
  void apply(MemoryModule& m, const Matrix& grad);
  void drop(int id);
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  MetricsLog run();

  // One full training step on samples_[t]; returns this step's events.
  // Exposed for the structural-safety fuzz tests.
  std::vector<StructuralEvent> step(long t);

  const Hierarchy& hierarchy() const { return h_; }
  const MetaController& controller() const { return ctl_; }
  MetaController& controller() { return ctl_; }
  const std::vector<Sample>& samples() const { return samples_; }
  long steps() const { return steps_; }

 private:
  struct StepStats {
    double task_loss = 0.0;
    double grad_norm_sq = 0.0;
    EvolveResult evolve;
  };

  // Forward, pullback gradients, due-module optimizer updates. Fills
  // grads_per_level and the per-level surprise values; no adaptation.
  static double inner_step(Hierarchy& h, OptimizerBank& bank, const Sample& s,
                           std::vector<Matrix>* grads_out);

  // Mean task loss of k inner steps on cloned state, starting at sample
  // index `start`. No structural changes, no frequency or beta drift.
  double rollout_score(const Hierarchy& h, const OptimizerBank& bank, long start, int k) const;

  // Mean task loss of k fully adaptive steps on cloned state (inner updates
  // plus controller evolution) under the given controller parameters; used
  // for the optional meta-parameter updates.
  double adaptive_rollout_score(const MetaParams& params, long start, int k) const;

  void refresh_freq_gradients(long t);
  void refresh_beta_gradient(long t);
  void refresh_phi(long t);
  void evaluate_segment_end(int segment, MetricsLog& log);

  ExperimentConfig cfg_;
  Stream stream_;
  std::vector<Sample> samples_;
  long steps_ = 0;
  Hierarchy h_;
  MetaController ctl_;
  OptimizerBank bank_;
  RngState rng_;  // beta exploration noise only
  double beta_grad_ = 0.0;
  StepStats last_;
};

MetricsLog run_experiment(const ExperimentConfig& cfg);

// Per-step losses of the best fixed linear map fitted over the first `limit`
// samples (0 = whole stream), the hindsight comparator. used_ridge reports a
// rank-deficiency fallback.
std::vector<double> hindsight_comparator(const StreamSpec& spec, long limit = 0,
                                         bool* used_ridge = nullptr);

// Weaker secondary baseline: an independent fit per segment, losses stitched.
std::vector<double> per_segment_comparator(const StreamSpec& spec, long limit = 0);

struct ModeSummary {
  double final_regret = 0.0;
  double aa = 0.0;
  double bwt = 0.0;
  long structural_events = 0;
};

struct CompareReport {
  ExperimentConfig base;
  int n_seeds = 0;
  std::vector<uint64_t> seeds;
  std::vector<MetricsLog> dnh_logs, static_logs;
  std::vector<ModeSummary> dnh, statics;  // per seed
  double mean_dnh_regret = 0.0, mean_static_regret = 0.0;
  double regret_ratio = 0.0;             // mean_dnh / mean_static
  bool regret_within_bound = false;      // mean_dnh <= 0.8 * mean_static
  // Same regrets against the weaker per-segment comparator.
  double mean_dnh_regret_seg = 0.0, mean_static_regret_seg = 0.0;
  double mean_dnh_aa = 0.0, mean_static_aa = 0.0;
  double mean_dnh_bwt = 0.0, mean_static_bwt = 0.0;
};

CompareReport run_compare(const ExperimentConfig& cfg, int n_seeds, int jobs);
std::string compare_report_text(const CompareReport& rep);

// Runs tasks[0..n) on up to `jobs` worker threads; task order of completion
// is irrelevant because each task writes only its own slot.
void run_parallel(std::vector<std::function<void()>>& tasks, int jobs);

}  // namespace dnh
